//! On-disk formats.
//!
//! * Images are binary PGM (`P5`) with maxval 255 or 65535. Samples map to
//!   `[0,1]` as `v / maxval`; 16-bit samples are big-endian.
//! * Gradient targets use a small float container: the line `ESRAG32`, the
//!   line `"<h> <w>"`, then the `(h−1)·w` values of `p` followed by the
//!   `h·(w−1)` values of `q`, row-major, as little-endian IEEE-754 `f32`.
//!   Values are widened to `f64` on read.
//! * Solve traces are CSV with 17 significant digits.
//! * Run configuration is `key = value` text with `#` comments.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::esra::{SolveTrace, DEFAULT_OUTER_ITERS, DEFAULT_STEP_MULTIPLIER};
use crate::fgp::{DEFAULT_FGP_ITERS, DEFAULT_FGP_TOL};
use crate::grid::{DualPair, Image};

pub const GRADIENT_MAGIC: &str = "ESRAG32";
pub const TRACE_HEADER: &str = "iter,objective,smooth,tv,elapsed_ms,fgp_iters";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        msg: msg.into(),
    }
}

/// Byte cursor over a netpbm-style header.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Next decimal token and its starting offset.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(self.path, start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(|v| (v, start))
            .ok_or_else(|| format_err(self.path, start, format!("{what} out of range")))
    }
}

/// Parses a binary PGM held in memory. `path` is only used in errors.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err(path, 0, "missing P5 magic"));
    }
    let mut cur = HeaderCursor {
        bytes,
        pos: 2,
        path,
    };
    let (width, width_at) = cur.number("width")?;
    let (height, _) = cur.number("height")?;
    let (maxval, maxval_at) = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err(path, width_at, "zero image dimension"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(format_err(
            path,
            maxval_at,
            format!("unsupported maxval {maxval}"),
        ));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(format_err(path, cur.pos, "expected whitespace after maxval")),
    }
    let sample_bytes = if maxval == 255 { 1 } else { 2 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(sample_bytes))
        .ok_or_else(|| format_err(path, maxval_at, "image too large"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated payload: need {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(format_err(
            path,
            cur.pos + expected,
            "trailing bytes after payload",
        ));
    }
    let scale = maxval as f64;
    let data = if sample_bytes == 1 {
        payload.iter().map(|&b| b as f64 / scale).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    Image::new(height, width, data)
}

/// Encodes an image in `[0,1]` as binary PGM, rounding half away from zero.
pub fn encode_pgm(image: &Image, maxval: u16) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(Error::argument(format!("unsupported maxval {maxval}")));
    }
    if !image.is_intensity() {
        return Err(Error::argument("PGM output requires values in [0,1]"));
    }
    let (h, w) = image.dims();
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    let scale = maxval as f64;
    for &v in image.as_slice() {
        let s = (v * scale).round() as u16;
        if maxval == 255 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    decode_pgm(&read_bytes(path)?, path)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Image, maxval: u16) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(image, maxval)?)
}

pub fn decode_gradient(bytes: &[u8], path: &Path) -> Result<DualPair> {
    let magic = format!("{GRADIENT_MAGIC}\n");
    if !bytes.starts_with(magic.as_bytes()) {
        return Err(format_err(path, 0, "missing ESRAG32 magic line"));
    }
    let dims_start = magic.len();
    let dims_end = bytes[dims_start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| dims_start + p)
        .ok_or_else(|| format_err(path, dims_start, "unterminated dimension line"))?;
    let line = std::str::from_utf8(&bytes[dims_start..dims_end])
        .map_err(|_| format_err(path, dims_start, "dimension line is not ASCII"))?;
    let mut parts = line.split(' ');
    let mut dim = || -> Option<usize> {
        let s = parts.next()?;
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse().ok().filter(|&n: &usize| n > 0)
    };
    let (h, w) = match (dim(), dim(), parts.next()) {
        (Some(h), Some(w), None) => (h, w),
        _ => {
            return Err(format_err(
                path,
                dims_start,
                format!("bad dimension line {line:?}"),
            ))
        }
    };
    let (np, nq) = DualPair::component_lens(h, w);
    let payload_start = dims_end + 1;
    let payload = &bytes[payload_start..];
    let expected = (np + nq) * 4;
    if payload.len() != expected {
        let offset = payload_start + payload.len().min(expected);
        return Err(format_err(
            path,
            offset,
            format!(
                "payload for {h}x{w} needs {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(np + nq);
    for (k, c) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        if !v.is_finite() {
            return Err(format_err(path, payload_start + 4 * k, "non-finite value"));
        }
        values.push(v as f64);
    }
    let q = values.split_off(np);
    DualPair::new(h, w, values, q)
}

pub fn encode_gradient(pair: &DualPair) -> Vec<u8> {
    let (h, w) = pair.dims();
    let mut out = format!("{GRADIENT_MAGIC}\n{h} {w}\n").into_bytes();
    for &v in pair.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_gradient_file(path: impl AsRef<Path>) -> Result<DualPair> {
    let path = path.as_ref();
    decode_gradient(&read_bytes(path)?, path)
}

pub fn write_gradient_file(path: impl AsRef<Path>, pair: &DualPair) -> Result<()> {
    write_bytes(path.as_ref(), &encode_gradient(pair))
}

/// The trace as CSV text, header included.
pub fn trace_to_csv(trace: &SolveTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let iters: Vec<String> = r.fgp_iters.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.3},{}",
            r.iter,
            r.objective.total,
            r.objective.smooth,
            r.objective.tv,
            r.elapsed_ms,
            iters.join(";")
        );
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &SolveTrace) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(trace_to_csv(trace).as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    pub total_iters: usize,
    pub fgp_iters: usize,
    pub fgp_tol: f64,
    /// `L_s = step_multiplier · L(f)`; must be at least 1.
    pub step_multiplier: f64,
    pub warm_start: bool,
    pub workers: Option<usize>,
    pub mixtures: Vec<PathBuf>,
    pub targets: Vec<PathBuf>,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "lambda",
    "coeffs",
    "total_iters",
    "fgp_iters",
    "fgp_tol",
    "step_multiplier",
    "warm_start",
    "workers",
    "mixtures",
    "targets",
    "out",
    "trace",
];

impl RunConfig {
    /// Serializes back to the `key = value` form accepted by
    /// [`parse_run_config`].
    pub fn to_text(&self) -> String {
        let join_f = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let join_p = |v: &[PathBuf]| {
            v.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "lambda = {:?}", self.lambda);
        let _ = writeln!(s, "coeffs = {}", join_f(&self.coeffs));
        let _ = writeln!(s, "total_iters = {}", self.total_iters);
        let _ = writeln!(s, "fgp_iters = {}", self.fgp_iters);
        let _ = writeln!(s, "fgp_tol = {:?}", self.fgp_tol);
        let _ = writeln!(s, "step_multiplier = {:?}", self.step_multiplier);
        let _ = writeln!(s, "warm_start = {}", self.warm_start);
        if let Some(w) = self.workers {
            let _ = writeln!(s, "workers = {w}");
        }
        let _ = writeln!(s, "mixtures = {}", join_p(&self.mixtures));
        let _ = writeln!(s, "targets = {}", join_p(&self.targets));
        let _ = writeln!(s, "out = {}", self.out.display());
        if let Some(t) = &self.trace {
            let _ = writeln!(s, "trace = {}", t.display());
        }
        s
    }

    /// Cross-field checks; `lines` maps keys to their source line.
    fn validate(&self, lines: &HashMap<&str, usize>) -> Result<()> {
        let at = |key: &str| lines.get(key).copied().unwrap_or(0);
        let err = |key: &str, msg: String| Error::Config { line: at(key), msg };
        if self.coeffs.len() != self.mixtures.len() {
            return Err(err(
                "coeffs",
                format!(
                    "{} coefficients for {} mixtures",
                    self.coeffs.len(),
                    self.mixtures.len()
                ),
            ));
        }
        if self.targets.len() != self.mixtures.len() + 1 {
            return Err(err(
                "targets",
                format!(
                    "{} mixtures need {} gradient targets, got {}",
                    self.mixtures.len(),
                    self.mixtures.len() + 1,
                    self.targets.len()
                ),
            ));
        }
        if self.lambda < 0.0 {
            return Err(err("lambda", "lambda must be nonnegative".into()));
        }
        if self.total_iters == 0 {
            return Err(err("total_iters", "total_iters must be positive".into()));
        }
        if self.fgp_iters == 0 {
            return Err(err("fgp_iters", "fgp_iters must be positive".into()));
        }
        if self.fgp_tol < 0.0 {
            return Err(err("fgp_tol", "fgp_tol must be nonnegative".into()));
        }
        if self.step_multiplier < 1.0 {
            return Err(err(
                "step_multiplier",
                "step_multiplier must be at least 1".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(err("workers", "workers must be positive".into()));
        }
        Ok(())
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config {
            line,
            msg: format!("expected a finite number, got {value:?}"),
        })
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::Config {
        line,
        msg: format!("expected a nonnegative integer, got {value:?}"),
    })
}

fn parse_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses `key = value` configuration text and applies defaults for the
/// optional keys.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut lines: HashMap<&str, usize> = HashMap::new();
    let mut values: HashMap<&str, &str> = HashMap::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: format!("expected `key = value`, got {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let key = *CONFIG_KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| Error::Config {
                line,
                msg: format!("unknown key {key:?}"),
            })?;
        if lines.insert(key, line).is_some() {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key {key:?}"),
            });
        }
        values.insert(key, value);
    }

    let required = |key: &str| {
        values.get(key).copied().ok_or_else(|| Error::Config {
            line: last_line,
            msg: format!("missing required key {key:?}"),
        })
    };
    let line_of = |key: &str| lines.get(key).copied().unwrap_or(0);

    let lambda = parse_f64(required("lambda")?, line_of("lambda"))?;
    let coeffs = parse_list(required("coeffs")?)
        .map(|v| parse_f64(v, line_of("coeffs")))
        .collect::<Result<Vec<_>>>()?;
    let mixtures: Vec<PathBuf> = parse_list(required("mixtures")?).map(PathBuf::from).collect();
    let targets: Vec<PathBuf> = parse_list(required("targets")?).map(PathBuf::from).collect();
    if coeffs.is_empty() || mixtures.is_empty() {
        return Err(Error::Config {
            line: line_of(if coeffs.is_empty() { "coeffs" } else { "mixtures" }),
            msg: "lists must not be empty".into(),
        });
    }

    let optional_usize = |key: &str, default: usize| -> Result<usize> {
        values
            .get(key)
            .map_or(Ok(default), |v| parse_usize(v, line_of(key)))
    };
    let optional_f64 = |key: &str, default: f64| -> Result<f64> {
        values
            .get(key)
            .map_or(Ok(default), |v| parse_f64(v, line_of(key)))
    };

    let warm_start = match values.get("warm_start").copied() {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(Error::Config {
                line: line_of("warm_start"),
                msg: format!("expected true or false, got {other:?}"),
            })
        }
    };
    let workers = values
        .get("workers")
        .map(|v| parse_usize(v, line_of("workers")))
        .transpose()?;

    let config = RunConfig {
        lambda,
        coeffs,
        total_iters: optional_usize("total_iters", DEFAULT_OUTER_ITERS)?,
        fgp_iters: optional_usize("fgp_iters", DEFAULT_FGP_ITERS)?,
        fgp_tol: optional_f64("fgp_tol", DEFAULT_FGP_TOL)?,
        step_multiplier: optional_f64("step_multiplier", DEFAULT_STEP_MULTIPLIER)?,
        warm_start,
        workers,
        mixtures,
        targets,
        out: values
            .get("out")
            .map_or_else(|| PathBuf::from("recovered"), PathBuf::from),
        trace: values.get("trace").map(PathBuf::from),
    };
    config.validate(&lines)?;
    Ok(config)
}

pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esra::TraceRecord;
    use crate::mixing::Objective;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn decode_eight_bit() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 64]);
        let img = decode_pgm(&bytes, p()).unwrap();
        assert_eq!(
            img.as_slice(),
            &[0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]
        );
    }

    #[test]
    fn decode_sixteen_bit_big_endian() {
        let mut bytes = b"P5\n# comment\n3 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x00, 0x00, 0xff, 0xff, 0x80, 0x00]);
        let img = decode_pgm(&bytes, p()).unwrap();
        assert_eq!(img.dims(), (1, 3));
        assert_eq!(img.as_slice(), &[0.0, 1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn width_comes_before_height() {
        let mut bytes = b"P5 3 2 255 ".to_vec();
        bytes.extend_from_slice(&[0; 6]);
        assert_eq!(decode_pgm(&bytes, p()).unwrap().dims(), (2, 3));
    }

    #[test]
    fn pgm_errors_name_offsets() {
        match decode_pgm(b"P6\n1 1\n255\n\0", p()) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
        match decode_pgm(b"P5\n2 2\n255\n\x01\x02", p()) {
            Err(Error::Format { offset: 13, .. }) => {}
            other => panic!("{other:?}"),
        }
        match decode_pgm(b"P5\n1 1\n1023\n\0\0", p()) {
            Err(Error::Format { offset, msg, .. }) => {
                assert_eq!(offset, 7);
                assert!(msg.contains("maxval"));
            }
            other => panic!("{other:?}"),
        }
        match decode_pgm(b"P5\n1 x\n255\n\0", p()) {
            Err(Error::Format { offset: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(decode_pgm(b"P5\n1 1\n255\n\0\0", p()).is_err());
    }

    #[test]
    fn encode_rounds_half_away_from_zero() {
        let img = Image::from_rows(&[[0.5 / 255.0, 1.0, 0.0]]);
        let bytes = encode_pgm(&img, 255).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 1\n255\n");
        assert_eq!(&bytes[11..], &[1, 255, 0]);
        assert!(encode_pgm(&Image::from_rows(&[[1.2]]), 255).is_err());
        assert!(encode_pgm(&img, 1000).is_err());
    }

    #[test]
    fn gradient_file_layout() {
        let pair = DualPair::new(1, 3, vec![], vec![0.5, -2.0]).unwrap();
        let bytes = encode_gradient(&pair);
        let mut expect = b"ESRAG32\n1 3\n".to_vec();
        expect.extend_from_slice(&0.5f32.to_le_bytes());
        expect.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expect);
        assert_eq!(decode_gradient(&bytes, p()).unwrap(), pair);
    }

    #[test]
    fn zero_gradient_payload() {
        let mut bytes = b"ESRAG32\n2 2\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        assert_eq!(decode_gradient(&bytes, p()).unwrap(), DualPair::zeros(2, 2));
    }

    #[test]
    fn gradient_errors() {
        assert!(matches!(
            decode_gradient(b"ESRAG64\n1 1\n", p()),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_gradient(b"ESRAG32\n1 2\n\0\0", p()),
            Err(Error::Format { offset: 14, .. })
        ));
        assert!(matches!(
            decode_gradient(b"ESRAG32\n1  2\n", p()),
            Err(Error::Format { offset: 8, .. })
        ));
        let mut nan = b"ESRAG32\n1 2\n".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_gradient(&nan, p()),
            Err(Error::Format { offset: 12, .. })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        assert_eq!(trace_to_csv(&SolveTrace::default()), format!("{TRACE_HEADER}\n"));
        let trace = SolveTrace {
            records: vec![TraceRecord {
                iter: 1,
                objective: Objective {
                    total: 0.1,
                    smooth: 0.075,
                    tv: 0.025,
                },
                elapsed_ms: 1.25,
                fgp_iters: vec![3, 4],
            }],
        };
        let csv = trace_to_csv(&trace);
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "1,1.0000000000000001e-1,7.4999999999999997e-2,2.5000000000000001e-2,1.250,3;4"
        );
        let parsed: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 0.1);
    }

    const MINIMAL: &str = "\
# minimal run
lambda = 0.05
coeffs = 0.7,0.6
mixtures = m1.pgm, m2.pgm
targets = e1.esrag,e2.esrag,e3.esrag
";

    #[test]
    fn config_defaults() {
        let cfg = parse_run_config(MINIMAL).unwrap();
        assert_eq!(cfg.coeffs, vec![0.7, 0.6]);
        assert_eq!(cfg.total_iters, 100);
        assert_eq!(cfg.fgp_tol, 0.0001);
        assert_eq!(cfg.step_multiplier, 2.0);
        assert_eq!(cfg.fgp_iters, 50);
        assert!(!cfg.warm_start);
        assert_eq!(cfg.workers, None);
        assert_eq!(cfg.mixtures, vec![PathBuf::from("m1.pgm"), PathBuf::from("m2.pgm")]);
        assert_eq!(parse_run_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn config_errors_name_lines() {
        let bad = MINIMAL.replace("lambda = 0.05", "lambda = banana");
        assert!(matches!(
            parse_run_config(&bad),
            Err(Error::Config { line: 2, .. })
        ));
        let unknown = format!("{MINIMAL}colour = red\n");
        assert!(matches!(
            parse_run_config(&unknown),
            Err(Error::Config { line: 6, .. })
        ));
        let missing = MINIMAL.replace("lambda = 0.05", "");
        match parse_run_config(&missing) {
            Err(Error::Config { msg, .. }) => assert!(msg.contains("lambda")),
            other => panic!("{other:?}"),
        }
        let dup = format!("{MINIMAL}lambda = 1\n");
        assert!(matches!(
            parse_run_config(&dup),
            Err(Error::Config { line: 6, .. })
        ));
        let short = MINIMAL.replace("e3.esrag", "");
        assert!(matches!(
            parse_run_config(&short),
            Err(Error::Config { line: 5, .. })
        ));
        let step = format!("{MINIMAL}step_multiplier = 0.5\n");
        assert!(parse_run_config(&step).is_err());
        let keys_are_case_sensitive = MINIMAL.replace("lambda", "Lambda");
        assert!(parse_run_config(&keys_are_case_sensitive).is_err());
    }
}
