use super::tree::Tree;
use crate::error::{Error, Result};

pub(crate) struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Encoder { buf: Vec::new() }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn tree(&mut self, t: &Tree) {
        self.u64(t.n_nodes() as u64);
        for i in 0..t.n_nodes() {
            self.u32(t.feature[i]);
            self.buf.extend_from_slice(&t.threshold[i].to_le_bytes());
            self.u32(t.left[i]);
            self.u32(t.right[i]);
            self.buf.extend_from_slice(&t.value[i].to_le_bytes());
        }
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn truncated() -> Error {
    Error::format("model blob", "truncated")
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self.buf.get(self.pos..self.pos + N).ok_or_else(truncated)?;
        self.pos += N;
        Ok(s.try_into().expect("length checked"))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(truncated());
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len(1)?;
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn tree(&mut self) -> Result<Tree> {
        let n = self.len(20)?;
        let mut t = Tree {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
        };
        for _ in 0..n {
            t.feature.push(self.u32()?);
            t.threshold.push(self.f32()?);
            let (l, r) = (self.u32()?, self.u32()?);
            t.left.push(l);
            t.right.push(r);
            t.value.push(self.f32()?);
        }
        for i in 0..n {
            if t.feature[i] != u32::MAX && !(i < t.left[i] as usize && t.left[i] as usize <= n - 1 && i < t.right[i] as usize && t.right[i] as usize <= n - 1) {
                return Err(Error::format("model blob", "tree child index out of range"));
            }
        }
        Ok(t)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format("model blob", "trailing bytes"));
        }
        Ok(())
    }
}
