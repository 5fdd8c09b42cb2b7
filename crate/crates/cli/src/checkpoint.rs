//! Training checkpoints.
//!
//! Little-endian layout:
//!
//! | field | encoding |
//! |---|---|
//! | magic | 4 bytes `MFCK` |
//! | version | u32 (1) |
//! | config digest | 64 ASCII hex bytes |
//! | config text | u32 length + UTF-8, canonical `key = value` form |
//! | class names | u32 count, then each as u32 length + UTF-8 |
//! | step | u64 Adam step counter |
//! | lr, best validation loss | f64, f64 |
//! | epochs since improvement, plateau count | u64, u64 |
//! | parameters, Adam first moment, Adam second moment | three parameter blocks |
//!
//! A parameter block is a u8 modulation kind (0 none, 1 FIR taps, 2 sinc
//! cutoffs) followed by five arrays in order (TF cutoffs, modulation
//! parameters, normalization affine, head weights, head bias), each a u64
//! count and that many f64 values.

use std::path::Path;

use modfront_core::learn::{ModParams, ParamVector, TrainState};

use crate::artifact::{write_file, Cursor};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"MFCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: Config,
    pub class_names: Vec<String>,
    pub state: TrainState,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_params(out: &mut Vec<u8>, p: &ParamVector) {
    out.push(match p.mod_params {
        ModParams::None => 0,
        ModParams::Fir(_) => 1,
        ModParams::Sinc(_) => 2,
    });
    for (_, block) in p.blocks() {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn get_str(cur: &mut Cursor) -> CliResult<String> {
    let n = cur.u32()? as usize;
    String::from_utf8(cur.take(n)?.to_vec()).map_err(|_| CliError::Io("checkpoint string is not UTF-8".into()))
}

fn get_params(cur: &mut Cursor) -> CliResult<ParamVector> {
    let kind = cur.take(1)?[0];
    let mut arrays = Vec::with_capacity(5);
    for _ in 0..5 {
        let n = cur.u64()? as usize;
        arrays.push(cur.f64s(n)?);
    }
    let mut it = arrays.into_iter();
    let tf_cutoffs = it.next().unwrap();
    let m = it.next().unwrap();
    let mod_params = match kind {
        0 if m.is_empty() => ModParams::None,
        1 => ModParams::Fir(m),
        2 => ModParams::Sinc(m),
        _ => return Err(CliError::Io(format!("unknown modulation block kind {kind}"))),
    };
    Ok(ParamVector {
        tf_cutoffs,
        mod_params,
        norm_affine: it.next().unwrap(),
        head_weights: it.next().unwrap(),
        head_bias: it.next().unwrap(),
    })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(self.config.digest().as_bytes());
        put_str(&mut out, &self.config.to_text());
        out.extend_from_slice(&(self.class_names.len() as u32).to_le_bytes());
        for name in &self.class_names {
            put_str(&mut out, name);
        }
        let s = &self.state;
        out.extend_from_slice(&s.step.to_le_bytes());
        out.extend_from_slice(&s.lr.to_le_bytes());
        out.extend_from_slice(&s.best_val_loss.to_le_bytes());
        out.extend_from_slice(&(s.epochs_since_improve as u64).to_le_bytes());
        out.extend_from_slice(&(s.plateau_count as u64).to_le_bytes());
        for p in [&s.params, &s.adam_m, &s.adam_v] {
            put_params(&mut out, p);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(CliError::Io("not a checkpoint (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(CliError::Io(format!("unsupported checkpoint version {version}")));
        }
        let digest = String::from_utf8_lossy(cur.take(64)?).into_owned();
        let config = Config::parse(&get_str(&mut cur)?)?;
        if config.digest() != digest {
            return Err(CliError::Io("checkpoint config text does not match its digest".into()));
        }
        let n = cur.u32()? as usize;
        let class_names = (0..n).map(|_| get_str(&mut cur)).collect::<CliResult<Vec<_>>>()?;
        let step = cur.u64()?;
        let lr = cur.f64()?;
        let best_val_loss = cur.f64()?;
        let epochs_since_improve = cur.u64()? as usize;
        let plateau_count = cur.u64()? as usize;
        let params = get_params(&mut cur)?;
        let adam_m = get_params(&mut cur)?;
        let adam_v = get_params(&mut cur)?;
        if cur.pos != bytes.len() {
            return Err(CliError::Io("trailing bytes after checkpoint".into()));
        }
        if !params.same_shape(&adam_m) || !params.same_shape(&adam_v) {
            return Err(CliError::Io("optimizer moments do not match the parameter layout".into()));
        }
        config.front_end(class_names.len()).check_params(&params)?;
        let mut state = TrainState::new(params, lr);
        state.adam_m = adam_m;
        state.adam_v = adam_v;
        state.step = step;
        state.best_val_loss = best_val_loss;
        state.epochs_since_improve = epochs_since_improve;
        state.plateau_count = plateau_count;
        Ok(Self {
            config,
            class_names,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Io(msg) => CliError::Io(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
