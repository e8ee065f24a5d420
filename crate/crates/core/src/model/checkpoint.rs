//! Checkpoint files: a text header followed by raw little-endian `f64`s.
//!
//! ```text
//! dualcan-checkpoint 1
//! hparam <key> <value>       (one per hyperparameter)
//! meta <key> <value>         (optional, free-form)
//! tensor <name> <r>x<c> <offset> <count>
//! end
//! <payload>
//! ```
//! Offsets count `f64` values from the start of the payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::hparams::HyperParams;
use crate::layers::ParamTree;
use crate::tensor::Tensor;

const MAGIC: &str = "dualcan-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hp: HyperParams,
    pub params: ModelParams<Tensor>,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(hp: HyperParams, params: ModelParams<Tensor>) -> Self {
        Self {
            hp,
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MAGIC} {VERSION}\n");
        for (k, v) in self.hp.to_pairs() {
            header.push_str(&format!("hparam {k} {v}\n"));
        }
        for (k, v) in &self.meta {
            header.push_str(&format!("meta {k} {v}\n"));
        }
        let mut offset = 0;
        let mut payload = Vec::new();
        self.params.visit("", &mut |name, t| {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            header.push_str(&format!(
                "tensor {name} {} {offset} {}\n",
                dims.join("x"),
                t.numel()
            ));
            offset += t.numel();
            for x in t.data() {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        });
        header.push_str("end\n");
        let mut bytes = header.into_bytes();
        bytes.extend(payload);
        bytes
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let bad = |line: usize, detail: String| Error::Format {
            path: path.to_string(),
            line,
            detail,
        };
        let mut pos = 0;
        let mut lines = Vec::new();
        loop {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad(lines.len() + 1, "header is not terminated by `end`".into()))?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|_| bad(lines.len() + 1, "header is not UTF-8".into()))?
                .to_string();
            pos += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
        }

        let first = lines.first().ok_or_else(|| bad(1, "empty header".into()))?;
        if *first != format!("{MAGIC} {VERSION}") {
            return Err(bad(1, format!("unsupported header `{first}`")));
        }
        let mut hparams = BTreeMap::new();
        let mut meta = BTreeMap::new();
        let mut directory: BTreeMap<String, (Vec<usize>, usize, usize)> = BTreeMap::new();
        for (i, line) in lines.iter().enumerate().skip(1) {
            let n = i + 1;
            let parts: Vec<&str> = line.split(' ').collect();
            match parts.as_slice() {
                ["hparam", k, v] => {
                    hparams.insert(k.to_string(), v.to_string());
                }
                ["meta", k, v @ ..] => {
                    meta.insert(k.to_string(), v.join(" "));
                }
                ["tensor", name, dims, offset, count] => {
                    let shape = dims
                        .split('x')
                        .map(str::parse)
                        .collect::<std::result::Result<Vec<usize>, _>>()
                        .map_err(|_| bad(n, format!("bad shape `{dims}`")))?;
                    let offset = offset.parse().map_err(|_| bad(n, "bad offset".into()))?;
                    let count = count.parse().map_err(|_| bad(n, "bad count".into()))?;
                    directory.insert(name.to_string(), (shape, offset, count));
                }
                _ => return Err(bad(n, format!("unrecognised header line `{line}`"))),
            }
        }
        let hp = HyperParams::from_pairs(&hparams)?;

        let payload = &bytes[pos..];
        if !payload.len().is_multiple_of(8) {
            return Err(bad(0, "payload length is not a multiple of 8".into()));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();

        // Shapes are checked against a freshly initialised template.
        let template = ModelParams::init(&hp, 0);
        let mut failure = None;
        let params = template.map_named("", &mut |name, t| {
            let loaded = match directory.remove(name) {
                None => Err(format!("missing tensor `{name}`")),
                Some((shape, offset, count)) => {
                    if shape != t.shape() || count != t.numel() {
                        Err(format!(
                            "tensor `{name}` has shape {shape:?}, expected {:?}",
                            t.shape()
                        ))
                    } else if offset + count > values.len() {
                        Err(format!("tensor `{name}` runs past the payload"))
                    } else {
                        Tensor::new(shape, values[offset..offset + count].to_vec())
                            .map_err(|e| format!("tensor `{name}`: {e}"))
                    }
                }
            };
            loaded.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                t.clone()
            })
        });
        if let Some(e) = failure {
            return Err(bad(0, e));
        }
        if let Some(name) = directory.keys().next() {
            return Err(bad(0, format!("unexpected tensor `{name}`")));
        }
        Ok(Self { hp, params, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}
