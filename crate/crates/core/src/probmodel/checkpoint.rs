//! Plain-text model checkpoints. Floats use Rust's shortest round-trip
//! formatting, so save followed by load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::model::{ForecastModel, ModelConfig, ParamLayout};
use crate::causal::TargetTransform;
use crate::error::{Error, Result};

const MAGIC: &str = "stcast-checkpoint 1";

pub fn to_string(model: &ForecastModel) -> String {
    let c = &model.config;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "[config]");
    let _ = writeln!(s, "hidden_size={}", c.hidden_size);
    let _ = writeln!(s, "num_layers={}", c.num_layers);
    let _ = writeln!(s, "distribution={}", c.distribution);
    let _ = writeln!(s, "context_len={}", c.context_len);
    let _ = writeln!(s, "horizon={}", c.horizon);
    let _ = writeln!(s, "learning_rate={:?}", c.learning_rate);
    let _ = writeln!(s, "epochs={}", c.epochs);
    let _ = writeln!(s, "grad_clip={:?}", c.grad_clip);
    let _ = writeln!(s, "num_samples={}", c.num_samples);
    let _ = writeln!(s, "batch_size={}", c.batch_size);
    let _ = writeln!(s, "seed={}", c.seed);
    let _ = writeln!(s, "[scaler]");
    let _ = writeln!(s, "log1p={}", model.input_scaler.log1p);
    for (i, id) in model.region_ids.iter().enumerate() {
        let _ = writeln!(
            s,
            "region={id},{:?},{:?}",
            model.input_scaler.mean[i], model.input_scaler.std[i]
        );
    }
    for t in model.layout.tensors() {
        let _ = writeln!(s, "[tensor {} {} {}]", t.name, t.rows, t.cols);
        for r in 0..t.rows {
            let row = &model.params[t.offset + r * t.cols..t.offset + (r + 1) * t.cols];
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s
}

pub fn save(model: &ForecastModel, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ForecastModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: PathBuf,
    line: u64,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        let (k, l) = self.inner.next()?;
        self.line = k as u64 + 1;
        Some(l)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        match self.next() {
            Some(l) if l == want => Ok(()),
            Some(l) => Err(self.err(format!("expected '{want}', found '{l}'"))),
            None => Err(self.err(format!("unexpected end of file, expected '{want}'"))),
        }
    }

    fn key(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next().ok_or_else(|| self.err(format!("missing '{key}'")))?;
        match l.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected '{key}=...', found '{l}'"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.key(key)?;
        v.parse().map_err(|_| self.err(format!("bad value '{v}' for {key}")))
    }
}

pub fn from_str(text: &str, path: &Path) -> Result<ForecastModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path: path.to_path_buf(),
        line: 0,
    };
    lines.expect(MAGIC)?;
    lines.expect("[config]")?;
    let config = ModelConfig {
        hidden_size: lines.parse("hidden_size")?,
        num_layers: lines.parse("num_layers")?,
        distribution: lines.key("distribution")?.parse()?,
        context_len: lines.parse("context_len")?,
        horizon: lines.parse("horizon")?,
        learning_rate: lines.parse("learning_rate")?,
        epochs: lines.parse("epochs")?,
        grad_clip: lines.parse("grad_clip")?,
        num_samples: lines.parse("num_samples")?,
        batch_size: lines.parse("batch_size")?,
        seed: lines.parse("seed")?,
    };
    config.validate()?;
    lines.expect("[scaler]")?;
    let log1p = lines.parse("log1p")?;
    let mut region_ids = Vec::new();
    let (mut mean, mut std) = (Vec::new(), Vec::new());
    let layout = ParamLayout::new(config.hidden_size, config.num_layers, config.distribution);
    let tensors = layout.tensors();
    let mut params = vec![0.0; layout.total];
    let mut next = lines.next();
    while let Some(l) = next {
        let Some(rest) = l.strip_prefix("region=") else {
            break;
        };
        let parts: Vec<&str> = rest.rsplitn(3, ',').collect();
        if parts.len() != 3 {
            return Err(lines.err(format!("bad region line '{l}'")));
        }
        let m: f64 = parts[1].parse().map_err(|_| lines.err("bad scaler mean"))?;
        let s: f64 = parts[0].parse().map_err(|_| lines.err("bad scaler std"))?;
        region_ids.push(parts[2].to_string());
        mean.push(m);
        std.push(s);
        next = lines.next();
    }
    for t in &tensors {
        let header = format!("[tensor {} {} {}]", t.name, t.rows, t.cols);
        match next {
            Some(l) if l == header => {}
            Some(l) => return Err(lines.err(format!("expected '{header}', found '{l}'"))),
            None => return Err(lines.err(format!("unexpected end of file, expected '{header}'"))),
        }
        for r in 0..t.rows {
            let l = lines.next().ok_or_else(|| lines.err("truncated tensor"))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| lines.err(format!("bad number in tensor {}", t.name)))?;
            if vals.len() != t.cols {
                return Err(lines.err(format!(
                    "tensor {} row has {} values, expected {}",
                    t.name,
                    vals.len(),
                    t.cols
                )));
            }
            params[t.offset + r * t.cols..t.offset + (r + 1) * t.cols].copy_from_slice(&vals);
        }
        next = lines.next();
    }
    if let Some(l) = next {
        return Err(lines.err(format!("trailing content '{l}'")));
    }
    let scaler = TargetTransform { log1p, mean, std };
    let mut model = ForecastModel::new(config, region_ids, scaler)?;
    model.params = params;
    Ok(model)
}
