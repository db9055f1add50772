//! Binary checkpoint container.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    4 bytes  "HSG2"
//! version  u32
//! count    u32
//! count × entry:
//!   name_len u32, name (UTF-8)
//!   dtype    u8    0 = f32, 1 = f64, 2 = u8
//!   ndim     u32, dims u64 × ndim
//!   len      u64, payload (len bytes)
//! ```
//!
//! A model checkpoint holds `config` (the config text), `iter`, `rng`, one
//! f32 entry per parameter named `<network>.<param>`, and per network the
//! Adam step counter plus f64 moments `adam.<network>.{m,v}.<param>`.

use std::collections::HashMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nets::{ModelBundle, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HSG2";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
    U8 = 2,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<u64>,
    pub payload: Vec<u8>,
}

impl Entry {
    pub fn f32(name: impl Into<String>, shape: &[usize], values: &[f64]) -> Self {
        Entry {
            name: name.into(),
            dtype: Dtype::F32,
            shape: shape.iter().map(|&d| d as u64).collect(),
            payload: values.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect(),
        }
    }

    pub fn f64(name: impl Into<String>, values: &[f64]) -> Self {
        Entry {
            name: name.into(),
            dtype: Dtype::F64,
            shape: vec![values.len() as u64],
            payload: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn bytes(name: impl Into<String>, payload: Vec<u8>) -> Self {
        Entry { name: name.into(), dtype: Dtype::U8, shape: vec![payload.len() as u64], payload }
    }

    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match self.dtype {
            Dtype::F32 => Ok(self
                .payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect()),
            Dtype::F64 => Ok(self
                .payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect()),
            Dtype::U8 => Err(Error::Checkpoint(format!("entry `{}` is not numeric", self.name))),
        }
    }
}

pub fn write_container(entries: &[Entry]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.dtype as u8);
        out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for d in &e.shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(e.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&e.payload);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: needed {n} bytes at offset {}, file has {}", self.pos, self.buf.len()))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_container(buf: &[u8]) -> Result<Vec<Entry>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {CHECKPOINT_VERSION})")));
    }
    let count = r.u32()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?
            .to_string();
        let dtype = match r.take(1)?[0] {
            0 => Dtype::F32,
            1 => Dtype::F64,
            2 => Dtype::U8,
            t => return Err(Error::Checkpoint(format!("entry `{name}`: unknown dtype {t}"))),
        };
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let plen = r.u64()? as usize;
        let elems = shape.iter().try_fold(1u64, |a, &d| a.checked_mul(d));
        if elems.and_then(|e| e.checked_mul(dtype.size() as u64)) != Some(plen as u64) {
            return Err(Error::Checkpoint(format!("entry `{name}`: payload length {plen} does not match shape {shape:?}")));
        }
        let payload = r.take(plen)?.to_vec();
        entries.push(Entry { name, dtype, shape, payload });
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(entries)
}

fn rng_bytes(rng: &ChaCha8Rng) -> Vec<u8> {
    let mut v = rng.get_seed().to_vec();
    v.extend_from_slice(&rng.get_stream().to_le_bytes());
    v.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    v
}

fn rng_from_bytes(b: &[u8]) -> Result<ChaCha8Rng> {
    use rand::SeedableRng;
    if b.len() != 56 {
        return Err(Error::Checkpoint(format!("rng state has {} bytes, expected 56", b.len())));
    }
    let seed: [u8; 32] = b[..32].try_into().expect("32 bytes");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(u64::from_le_bytes(b[32..40].try_into().expect("8 bytes")));
    rng.set_word_pos(u128::from_le_bytes(b[40..56].try_into().expect("16 bytes")));
    Ok(rng)
}

fn bundle_entries(b: &ModelBundle) -> Vec<Entry> {
    let mut e = vec![
        Entry::bytes("config", b.cfg.to_text().into_bytes()),
        Entry::bytes("iter", b.iter.to_le_bytes().to_vec()),
        Entry::bytes("rng", rng_bytes(&b.rng)),
    ];
    for ((name, net), opt) in b.networks().iter().zip(b.optimizers()) {
        let params = net.params();
        for p in &params {
            e.push(Entry::f32(format!("{name}.{}", p.name), p.tensor.shape(), &p.tensor.data()));
        }
        e.push(Entry::bytes(format!("adam.{name}.step"), opt.step.to_le_bytes().to_vec()));
        for (p, (m, v)) in params.iter().filter(|p| p.trainable).zip(opt.m.iter().zip(&opt.v)) {
            e.push(Entry::f64(format!("adam.{name}.m.{}", p.name), m));
            e.push(Entry::f64(format!("adam.{name}.v.{}", p.name), v));
        }
    }
    e
}

/// Writes the bundle and returns the number of bytes written.
pub fn save_checkpoint(bundle: &ModelBundle, path: &Path) -> Result<u64> {
    let buf = write_container(&bundle_entries(bundle));
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    Ok(buf.len() as u64)
}

fn read_file(path: &Path) -> Result<HashMap<String, Entry>> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(read_container(&buf)?.into_iter().map(|e| (e.name.clone(), e)).collect())
}

fn get<'m>(map: &'m HashMap<String, Entry>, name: &str) -> Result<&'m Entry> {
    map.get(name).ok_or_else(|| Error::Checkpoint(format!("missing entry `{name}`")))
}

fn u64_entry(map: &HashMap<String, Entry>, name: &str) -> Result<u64> {
    let e = get(map, name)?;
    let b: [u8; 8] = e
        .payload
        .as_slice()
        .try_into()
        .map_err(|_| Error::Checkpoint(format!("entry `{name}` is not a u64")))?;
    Ok(u64::from_le_bytes(b))
}

/// Validates every entry against `bundle` and only then overwrites its
/// parameters, optimizer states, RNG and iteration counter.
fn restore(bundle: &mut ModelBundle, map: &HashMap<String, Entry>) -> Result<()> {
    let mut params = Vec::new();
    let mut moments = Vec::new();
    let mut steps = Vec::new();
    for ((name, net), opt) in bundle.networks().iter().zip(bundle.optimizers()) {
        let ps = net.params();
        for p in &ps {
            let key = format!("{name}.{}", p.name);
            let e = get(map, &key)?;
            let want: Vec<u64> = p.tensor.shape().iter().map(|&d| d as u64).collect();
            if e.dtype != Dtype::F32 || e.shape != want {
                return Err(Error::Checkpoint(format!(
                    "`{key}`: stored {:?} {:?}, current config needs f32 {want:?}",
                    e.dtype, e.shape
                )));
            }
            params.push((p.tensor.clone(), e.to_f64()?));
        }
        steps.push(u64_entry(map, &format!("adam.{name}.step"))?);
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (p, cur) in ps.iter().filter(|p| p.trainable).zip(&opt.m) {
            for (kind, dst) in [("m", &mut m), ("v", &mut v)] {
                let key = format!("adam.{name}.{kind}.{}", p.name);
                let e = get(map, &key)?;
                if e.dtype != Dtype::F64 || e.shape != [cur.len() as u64] {
                    return Err(Error::Checkpoint(format!("`{key}`: wrong dtype or length")));
                }
                dst.push(e.to_f64()?);
            }
        }
        moments.push((m, v));
    }
    let rng = rng_from_bytes(&get(map, "rng")?.payload)?;
    let iter = u64_entry(map, "iter")?;

    for (t, vals) in params {
        t.data_mut().copy_from_slice(&vals);
    }
    for ((opt, (m, v)), step) in bundle.optimizers_mut().into_iter().zip(moments).zip(steps) {
        opt.m = m;
        opt.v = v;
        opt.step = step;
    }
    bundle.rng = rng;
    bundle.iter = iter;
    Ok(())
}

/// Rebuilds a bundle from the config stored in the file.
pub fn load_checkpoint(path: &Path) -> Result<ModelBundle> {
    let map = read_file(path)?;
    let text = std::str::from_utf8(&get(&map, "config")?.payload)
        .map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
    let cfg = TrainConfig::parse(text).map_err(|e| Error::Checkpoint(format!("stored config: {e}")))?;
    let mut bundle = ModelBundle::uninitialized(&cfg)?;
    restore(&mut bundle, &map)?;
    Ok(bundle)
}

/// Loads into an existing bundle; fails without touching it when the file
/// does not match its topology.
pub fn load_checkpoint_into(bundle: &mut ModelBundle, path: &Path) -> Result<()> {
    let map = read_file(path)?;
    restore(bundle, &map)
}
