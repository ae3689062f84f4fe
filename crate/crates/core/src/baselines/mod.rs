//! Comparison methods: preferential attachment and LINE-style first and
//! second order proximity embeddings.

mod line;
mod pa;

pub use line::{train_first_order, train_line, train_second_order, LineConfig, LineOrder};
pub use pa::{pa_score, pa_scores, write_pa_scores, PaScoreTable};
