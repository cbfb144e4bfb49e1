//! Versioned little-endian binary model files.
//!
//! Layout: magic, format version, variant, hyperparameters, fingerprints,
//! loss trace, then one or two parameter sets. Floats are stored as raw bits
//! so a save/load round trip is exact.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::engine::{FactorBlock, Hyperparams, Matrix, ModelParams, TrainedModel, Variant};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"WSVDMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
    fn matrix(&mut self, m: &Matrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for x in m.as_slice() {
            self.f64(*x);
        }
    }
    fn block(&mut self, b: &FactorBlock) {
        self.f64s(&b.user_bias);
        self.f64s(&b.item_bias);
        self.matrix(&b.user_factors);
        self.matrix(&b.item_factors);
    }
    fn params(&mut self, p: &ModelParams) {
        self.f64(p.mu);
        self.block(&p.base);
        match &p.shadow {
            Some(b) => {
                self.u8(1);
                self.block(b);
            }
            None => self.u8(0),
        }
        match &p.item_assist {
            Some(y) => {
                self.u8(1);
                self.f64s(y);
            }
            None => self.u8(0),
        }
        match &p.pair_assist {
            Some(m) => {
                self.u8(1);
                let mut entries: Vec<(&(u32, u32), &f64)> = m.iter().collect();
                entries.sort_unstable_by_key(|(k, _)| **k);
                self.u64(entries.len() as u64);
                for ((u, i), y) in entries {
                    self.u32(*u);
                    self.u32(*i);
                    self.f64(*y);
                }
            }
            None => self.u8(0),
        }
        match &p.neighbor_factors {
            Some(m) => {
                self.u8(1);
                self.matrix(m);
            }
            None => self.u8(0),
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated model file at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(elem as u64) > remaining {
            return Err(Error::Format(format!("length {n} exceeds remaining file size")));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Format(format!("bad flag byte {b}"))),
        }
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.saturating_mul(8) <= self.buf.len() - self.pos)
            .ok_or_else(|| Error::Format("matrix larger than file".into()))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<_>>()?;
        Matrix::from_vec(rows, cols, data)
    }
    fn block(&mut self) -> Result<FactorBlock> {
        Ok(FactorBlock {
            user_bias: self.f64s()?,
            item_bias: self.f64s()?,
            user_factors: self.matrix()?,
            item_factors: self.matrix()?,
        })
    }
    fn params(&mut self) -> Result<ModelParams> {
        let mu = self.f64()?;
        let base = self.block()?;
        let shadow = if self.flag()? { Some(self.block()?) } else { None };
        let item_assist = if self.flag()? { Some(self.f64s()?) } else { None };
        let pair_assist = if self.flag()? {
            let n = self.len(16)?;
            let mut m = HashMap::with_capacity(n);
            for _ in 0..n {
                let key = (self.u32()?, self.u32()?);
                m.insert(key, self.f64()?);
            }
            Some(m)
        } else {
            None
        };
        let neighbor_factors = if self.flag()? { Some(self.matrix()?) } else { None };
        let p = ModelParams {
            mu,
            base,
            shadow,
            item_assist,
            pair_assist,
            neighbor_factors,
        };
        let (nu, ni, k) = (p.n_users(), p.n_items(), p.factors());
        let shape_ok = |b: &FactorBlock| {
            b.user_bias.len() == nu
                && b.item_bias.len() == ni
                && (b.user_factors.rows(), b.user_factors.cols()) == (nu, k)
                && (b.item_factors.rows(), b.item_factors.cols()) == (ni, k)
        };
        let ok = shape_ok(&p.base)
            && p.shadow.as_ref().is_none_or(shape_ok)
            && p.item_assist.as_ref().is_none_or(|y| y.len() == ni)
            && p
                .neighbor_factors
                .as_ref()
                .is_none_or(|y| (y.rows(), y.cols()) == (ni, k));
        if !ok {
            return Err(Error::Format("inconsistent parameter block shapes".into()));
        }
        Ok(p)
    }
}

pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(model.variant.code());
    let h = &model.hyper;
    w.u64(h.factors as u64);
    w.f64(h.gamma);
    w.f64(h.gamma_art);
    w.f64(h.lambda);
    w.u64(h.epochs as u64);
    w.u64(h.seed);
    w.f64(h.mixture_weight);
    w.u8(h.clamp as u8);
    w.u8(h.center_neighbors as u8);
    w.u8(h.dual_base_only as u8);
    w.u64(model.sim_ref);
    w.u64(model.train_ref);
    w.f64s(&model.loss_trace);
    let parts: Vec<&ModelParams> = std::iter::once(&model.params)
        .chain(model.mixture_partner.as_ref())
        .collect();
    w.u8(parts.len() as u8);
    for p in parts {
        w.params(p);
    }
    w.0
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("not a wikisvd model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let code = r.u8()?;
    let variant =
        Variant::from_code(code).ok_or_else(|| Error::Format(format!("unknown variant code {code}")))?;
    let hyper = Hyperparams {
        factors: r.u64()? as usize,
        gamma: r.f64()?,
        gamma_art: r.f64()?,
        lambda: r.f64()?,
        epochs: r.u64()? as usize,
        seed: r.u64()?,
        mixture_weight: r.f64()?,
        clamp: r.flag()?,
        center_neighbors: r.flag()?,
        dual_base_only: r.flag()?,
    };
    let sim_ref = r.u64()?;
    let train_ref = r.u64()?;
    let loss_trace = r.f64s()?;
    let parts = r.u8()?;
    let expected = if variant == Variant::Mixture { 2 } else { 1 };
    if parts != expected {
        return Err(Error::Format(format!(
            "variant {variant} needs {expected} parameter sets, file has {parts}"
        )));
    }
    let params = r.params()?;
    let mixture_partner = if parts == 2 { Some(r.params()?) } else { None };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after model",
            bytes.len() - r.pos
        )));
    }
    Ok(TrainedModel {
        variant,
        hyper,
        params,
        mixture_partner,
        sim_ref,
        train_ref,
        loss_trace,
    })
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
