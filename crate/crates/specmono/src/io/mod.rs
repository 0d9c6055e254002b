//! Text formats for every artifact the pipeline writes or reads: formal
//! series, spectrum point clouds, model descriptions, covers, run configs,
//! synthesis manifests, chart reports, holonomy reports, matrix pairs and an
//! SVG scatter renderer.
//!
//! All formats are line-oriented UTF-8. Writers are byte-deterministic:
//! floats are printed with 17 significant digits (`{:.16e}`), which
//! round-trips every finite f64 exactly, and collections are emitted in a
//! fixed order. Readers skip blank lines and lines starting with `#`, and
//! report failures as [`ParseError`] carrying the byte offset of the
//! offending token. Non-finite floats are rejected on input everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::latticemono::{HolonomyClass, IMat2, MicroChart};
use crate::quantize::{GoodRectangle, ModelMap, ModelSystem, Provenance, SpectrumCloud};
use crate::symbolcalc::{C64, FormalSeries, Multidegree};

/// Largest matrix dimension `parse_jointpair` will accept. Guards against
/// quadratic allocation driven by a corrupted or hostile header.
pub const MAX_JOINTPAIR_DIM: usize = 256;

// ---------------------------------------------------------------------------
// errors

/// A syntax or validation failure while reading one of the text formats,
/// located by byte offset into the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    /// Byte offset of the offending token (0 when no position applies,
    /// e.g. a missing required key).
    pub offset: usize,
    /// 1-based line number, 0 when no position applies.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "parse error at byte {} (line {}): {}", self.offset, self.line, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

/// File-level failure: the underlying read/write, or a parse failure tagged
/// with the path it came from.
#[derive(Debug)]
pub enum IoError {
    Read { path: String, message: String },
    Write { path: String, message: String },
    Parse { path: String, error: ParseError },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Read { path, message } => write!(f, "{path}: {message}"),
            IoError::Write { path, message } => write!(f, "{path}: {message}"),
            IoError::Parse { path, error } => write!(f, "{path}: {error}"),
        }
    }
}

impl std::error::Error for IoError {}

fn err(offset: usize, line: usize, message: String) -> ParseError {
    ParseError { offset, line, message }
}

// ---------------------------------------------------------------------------
// scanning helpers

/// Iterates over content lines: yields (1-based line number, byte offset of
/// the line start, line without its terminator), skipping blank lines and
/// `#` comments.
struct ContentLines<'a> {
    text: &'a str,
    pos: usize,
    line_no: usize,
}

fn content_lines(text: &str) -> ContentLines<'_> {
    ContentLines { text, pos: 0, line_no: 0 }
}

impl<'a> Iterator for ContentLines<'a> {
    type Item = (usize, usize, &'a str);

    fn next(&mut self) -> Option<(usize, usize, &'a str)> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let (raw, advance) = match rest.find('\n') {
                Some(i) => (&rest[..i], i + 1),
                None => (rest, rest.len()),
            };
            self.pos = start + advance;
            self.line_no += 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let t = line.trim_start();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((self.line_no, start, line));
        }
        None
    }
}

/// Whitespace-separated tokens of a line with their byte offsets inside it.
/// Offsets come from `char_indices`, so slicing is always boundary-safe.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out
}

fn num<T: std::str::FromStr>(
    tok: (usize, &str),
    base: usize,
    line: usize,
    what: &str,
) -> Result<T, ParseError> {
    tok.1
        .parse::<T>()
        .map_err(|_| err(base + tok.0, line, format!("expected {what}, found `{}`", tok.1)))
}

fn finite(tok: (usize, &str), base: usize, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = num(tok, base, line, what)?;
    if !v.is_finite() {
        return Err(err(base + tok.0, line, format!("{what} must be finite, found `{}`", tok.1)));
    }
    Ok(v)
}

/// Checks that a fixed-position token equals a label like `ball` or `diff`.
fn tag(tok: (usize, &str), base: usize, line: usize, want: &str) -> Result<(), ParseError> {
    if tok.1 != want {
        return Err(err(base + tok.0, line, format!("expected `{want}`, found `{}`", tok.1)));
    }
    Ok(())
}

fn count(
    tk: &[(usize, &str)],
    base: usize,
    line: usize,
    want: usize,
    shape: &str,
) -> Result<(), ParseError> {
    if tk.len() != want {
        return Err(err(
            base,
            line,
            format!("expected {shape} ({} tokens), found {} tokens", want, tk.len()),
        ));
    }
    Ok(())
}

/// 17 significant digits: enough to reproduce any finite f64 bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// formal series

/// Serializes a formal series: header `formalseries v1 <Nmax> <Kmax>`, then
/// one term per line as `xi1 xi2 eps h k1 k2 re im`. Term order follows the
/// internal (degree, mode) ordering, so output is deterministic.
pub fn write_formalseries(series: &FormalSeries) -> String {
    let mut out = format!("formalseries v1 {} {}\n", series.n_max(), series.k_max());
    for (d, k, c) in series.iter_terms() {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            d.xi[0],
            d.xi[1],
            d.eps,
            d.h,
            k[0],
            k[1],
            fmt_f64(c.re),
            fmt_f64(c.im)
        ));
    }
    out
}

/// Reads the format written by [`write_formalseries`]. Repeated
/// (degree, mode) lines accumulate; coefficients below the pruning
/// threshold vanish on insertion, exactly as for programmatic construction.
pub fn parse_formalseries(text: &str) -> Result<FormalSeries, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `formalseries v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 4, "`formalseries v1 <Nmax> <Kmax>` header")?;
    tag(tk[0], off, lno, "formalseries")?;
    tag(tk[1], off, lno, "v1")?;
    let n_max: u32 = num(tk[2], off, lno, "weight cut (nonnegative integer)")?;
    let k_max: i32 = num(tk[3], off, lno, "Fourier cut (integer)")?;
    if k_max < 0 {
        return Err(err(off + tk[3].0, lno, format!("Fourier cut must be nonnegative, found {k_max}")));
    }

    let mut series = FormalSeries::zero(n_max, k_max);
    for (lno, off, line) in lines {
        let tk = tokens(line);
        count(&tk, off, lno, 8, "term `xi1 xi2 eps h k1 k2 re im`")?;
        let xi1: u32 = num(tk[0], off, lno, "xi1 power (nonnegative integer)")?;
        let xi2: u32 = num(tk[1], off, lno, "xi2 power (nonnegative integer)")?;
        let pe: u32 = num(tk[2], off, lno, "eps power (nonnegative integer)")?;
        let ph: u32 = num(tk[3], off, lno, "h power (nonnegative integer)")?;
        let k1: i32 = num(tk[4], off, lno, "mode index k1 (integer)")?;
        let k2: i32 = num(tk[5], off, lno, "mode index k2 (integer)")?;
        let re = finite(tk[6], off, lno, "coefficient real part")?;
        let im = finite(tk[7], off, lno, "coefficient imaginary part")?;
        let d = Multidegree::new(xi1, xi2, pe, ph);
        if d.weight() > n_max {
            return Err(err(
                off,
                lno,
                format!("term weight {} exceeds the declared cut {}", d.weight(), n_max),
            ));
        }
        if k1.abs() > k_max || k2.abs() > k_max {
            return Err(err(
                off + tk[4].0,
                lno,
                format!("mode ({k1}, {k2}) exceeds the declared Fourier cut {k_max}"),
            ));
        }
        // cuts were pre-checked, so insertion cannot fail
        series
            .add_term(d, [k1, k2], C64::new(re, im))
            .map_err(|e| err(off, lno, format!("{e}")))?;
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// spectrum point clouds

/// Serializes a point cloud: header `spectrum v1 eps <e> h <h>`, then one
/// `re im` pair per line in storage order.
pub fn write_spectrum(cloud: &SpectrumCloud) -> String {
    let mut out = format!("spectrum v1 eps {} h {}\n", fmt_f64(cloud.eps), fmt_f64(cloud.h));
    for p in &cloud.points {
        out.push_str(&fmt_f64(p.re));
        out.push(' ');
        out.push_str(&fmt_f64(p.im));
        out.push('\n');
    }
    out
}

/// Reads the format written by [`write_spectrum`]. `origin` labels the
/// cloud's provenance (typically the file path).
pub fn parse_spectrum(text: &str, origin: &str) -> Result<SpectrumCloud, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `spectrum v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 6, "`spectrum v1 eps <e> h <h>` header")?;
    tag(tk[0], off, lno, "spectrum")?;
    tag(tk[1], off, lno, "v1")?;
    tag(tk[2], off, lno, "eps")?;
    let eps = finite(tk[3], off, lno, "eps")?;
    tag(tk[4], off, lno, "h")?;
    let h = finite(tk[5], off, lno, "h")?;
    if eps <= 0.0 {
        return Err(err(off + tk[3].0, lno, format!("eps must be positive, found {eps}")));
    }
    if h <= 0.0 {
        return Err(err(off + tk[5].0, lno, format!("h must be positive, found {h}")));
    }

    let mut points = Vec::new();
    for (lno, off, line) in lines {
        let tk = tokens(line);
        count(&tk, off, lno, 2, "point `re im`")?;
        let re = finite(tk[0], off, lno, "point real part")?;
        let im = finite(tk[1], off, lno, "point imaginary part")?;
        points.push(C64::new(re, im));
    }
    Ok(SpectrumCloud { points, eps, h, provenance: Provenance::File { path: origin.to_string() } })
}

// ---------------------------------------------------------------------------
// model files

/// The `phi` name of a built-in map as it appears in model files.
pub fn model_name(map: &ModelMap) -> &'static str {
    match map {
        ModelMap::Identity => "identity",
        ModelMap::Twist { .. } => "twist",
        ModelMap::FocusFocusSector { .. } => "focusfocus-sector",
    }
}

/// Serializes a model description: `model v1` header, then one key per line
/// (`phi`, per-model parameters, `tau_c`, `maslov_k`, `delta`).
pub fn write_model(model: &ModelSystem) -> String {
    let mut out = String::from("model v1\n");
    out.push_str(&format!("phi {}\n", model_name(&model.map)));
    match &model.map {
        ModelMap::Identity => {}
        ModelMap::Twist { gamma } => out.push_str(&format!("gamma {}\n", fmt_f64(*gamma))),
        ModelMap::FocusFocusSector { rmin, rmax, anchor } => {
            out.push_str(&format!("rmin {}\n", fmt_f64(*rmin)));
            out.push_str(&format!("rmax {}\n", fmt_f64(*rmax)));
            out.push_str(&format!("anchor {}\n", fmt_f64(*anchor)));
        }
    }
    out.push_str(&format!("tau_c {} {}\n", fmt_f64(model.tau_c[0]), fmt_f64(model.tau_c[1])));
    out.push_str(&format!("maslov_k {} {}\n", model.maslov[0], model.maslov[1]));
    out.push_str(&format!("delta {}\n", fmt_f64(model.delta)));
    out
}

/// Key table of a key-per-line document: key -> (line, line offset, value
/// tokens with their in-line offsets).
type KeyTable<'a> = BTreeMap<&'a str, (usize, usize, Vec<(usize, &'a str)>)>;

/// Fetches a single-valued key from the parsed key table.
fn take_one<'a>(
    keys: &KeyTable<'a>,
    key: &str,
) -> Result<(usize, usize, (usize, &'a str)), ParseError> {
    let Some((lno, off, vals)) = keys.get(key) else {
        return Err(err(0, 0, format!("missing model key `{key}`")));
    };
    if vals.len() != 1 {
        return Err(err(*off, *lno, format!("key `{key}` takes exactly one value")));
    }
    Ok((*lno, *off, vals[0]))
}

/// Reads the format written by [`write_model`], validating parameter domains
/// (`delta` in (0, 1), focus-focus annulus inside radius 1/e).
pub fn parse_model(text: &str) -> Result<ModelSystem, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `model v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 2, "`model v1` header")?;
    tag(tk[0], off, lno, "model")?;
    tag(tk[1], off, lno, "v1")?;

    let mut keys: KeyTable = BTreeMap::new();
    for (lno, off, line) in lines {
        let tk = tokens(line);
        let (koff, key) = tk[0];
        match key {
            "phi" | "gamma" | "rmin" | "rmax" | "anchor" | "tau_c" | "maslov_k" | "delta" => {}
            other => return Err(err(off + koff, lno, format!("unknown model key `{other}`"))),
        }
        if keys.contains_key(key) {
            return Err(err(off + koff, lno, format!("duplicate model key `{key}`")));
        }
        keys.insert(key, (lno, off, tk[1..].to_vec()));
    }

    let (phi_line, phi_off, phi_tok) = take_one(&keys, "phi")?;
    let map = match phi_tok.1 {
        "identity" => ModelMap::Identity,
        "twist" => {
            let (l, o, t) = take_one(&keys, "gamma")?;
            ModelMap::Twist { gamma: finite(t, o, l, "gamma")? }
        }
        "focusfocus-sector" => {
            let (l0, o0, t0) = take_one(&keys, "rmin")?;
            let rmin = finite(t0, o0, l0, "rmin")?;
            let (l1, o1, t1) = take_one(&keys, "rmax")?;
            let rmax = finite(t1, o1, l1, "rmax")?;
            let (l2, o2, t2) = take_one(&keys, "anchor")?;
            let anchor = finite(t2, o2, l2, "anchor")?;
            if rmin <= 0.0 || rmin >= rmax {
                return Err(err(o0 + t0.0, l0, format!("need 0 < rmin < rmax, found rmin {rmin} rmax {rmax}")));
            }
            // the chart inversion is monotone only below radius 1/e
            if rmax >= (-1.0f64).exp() {
                return Err(err(o1 + t1.0, l1, format!("rmax must be below 1/e, found {rmax}")));
            }
            ModelMap::FocusFocusSector { rmin, rmax, anchor }
        }
        other => {
            return Err(err(
                phi_off + phi_tok.0,
                phi_line,
                format!("unknown map `{other}` (expected identity, twist or focusfocus-sector)"),
            ));
        }
    };
    for (key, owner) in [("gamma", "twist"), ("rmin", "focusfocus-sector"), ("rmax", "focusfocus-sector"), ("anchor", "focusfocus-sector")] {
        if keys.contains_key(key) && model_name(&map) != owner {
            let (lno, off, _) = keys[key];
            return Err(err(off, lno, format!("key `{key}` is only valid for model `{owner}`")));
        }
    }

    let Some((tc_line, tc_off, tc_vals)) = keys.get("tau_c") else {
        return Err(err(0, 0, "missing model key `tau_c`".into()));
    };
    if tc_vals.len() != 2 {
        return Err(err(*tc_off, *tc_line, "key `tau_c` takes exactly two values".into()));
    }
    let tau_c = [
        finite(tc_vals[0], *tc_off, *tc_line, "tau_c[0]")?,
        finite(tc_vals[1], *tc_off, *tc_line, "tau_c[1]")?,
    ];

    let Some((mk_line, mk_off, mk_vals)) = keys.get("maslov_k") else {
        return Err(err(0, 0, "missing model key `maslov_k`".into()));
    };
    if mk_vals.len() != 2 {
        return Err(err(*mk_off, *mk_line, "key `maslov_k` takes exactly two values".into()));
    }
    let maslov = [
        num::<i32>(mk_vals[0], *mk_off, *mk_line, "maslov index (integer)")?,
        num::<i32>(mk_vals[1], *mk_off, *mk_line, "maslov index (integer)")?,
    ];

    let (d_line, d_off, d_tok) = take_one(&keys, "delta")?;
    let delta = finite(d_tok, d_off, d_line, "delta")?;
    if delta <= 0.0 || delta >= 1.0 {
        return Err(err(d_off + d_tok.0, d_line, format!("delta must lie in (0, 1), found {delta}")));
    }

    Ok(ModelSystem::new(map, tau_c, maslov, delta))
}

// ---------------------------------------------------------------------------
// cover files

/// One ball of a value-space cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }

    pub fn overlaps(&self, other: &Ball) -> bool {
        let dx = other.center[0] - self.center[0];
        let dy = other.center[1] - self.center[1];
        let r = self.radius + other.radius;
        dx * dx + dy * dy < r * r
    }
}

/// A cover of value space by balls plus the loops (closed ball sequences)
/// whose holonomy is requested. Loops are stored open: the step from the
/// last ball back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSpec {
    pub balls: Vec<Ball>,
    pub loops: Vec<Vec<usize>>,
}

/// Serializes a cover: `cover v1` header, one `ball <cx> <cy> <r>` line per
/// ball (index = position), then one `loop <i0> <i1> ...` line per loop.
pub fn write_cover(cover: &CoverSpec) -> String {
    let mut out = String::from("cover v1\n");
    for b in &cover.balls {
        out.push_str(&format!(
            "ball {} {} {}\n",
            fmt_f64(b.center[0]),
            fmt_f64(b.center[1]),
            fmt_f64(b.radius)
        ));
    }
    for lp in &cover.loops {
        out.push_str("loop");
        for &i in lp {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
    }
    out
}

/// Reads the format written by [`write_cover`]. Loop entries must reference
/// declared balls.
pub fn parse_cover(text: &str) -> Result<CoverSpec, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `cover v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 2, "`cover v1` header")?;
    tag(tk[0], off, lno, "cover")?;
    tag(tk[1], off, lno, "v1")?;

    let mut balls = Vec::new();
    // loop entries carry (absolute offset, line, index) for range validation
    let mut raw_loops: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    for (lno, off, line) in lines {
        let tk = tokens(line);
        match tk[0].1 {
            "ball" => {
                count(&tk, off, lno, 4, "`ball <cx> <cy> <r>`")?;
                let cx = finite(tk[1], off, lno, "ball center x")?;
                let cy = finite(tk[2], off, lno, "ball center y")?;
                let r = finite(tk[3], off, lno, "ball radius")?;
                if r <= 0.0 {
                    return Err(err(off + tk[3].0, lno, format!("ball radius must be positive, found {r}")));
                }
                balls.push(Ball { center: [cx, cy], radius: r });
            }
            "loop" => {
                if tk.len() < 2 {
                    return Err(err(off, lno, "loop must list at least one ball index".into()));
                }
                let mut lp = Vec::with_capacity(tk.len() - 1);
                for &t in &tk[1..] {
                    let i: usize = num(t, off, lno, "ball index (nonnegative integer)")?;
                    lp.push((off + t.0, lno, i));
                }
                raw_loops.push(lp);
            }
            other => {
                return Err(err(off + tk[0].0, lno, format!("unknown cover directive `{other}`")));
            }
        }
    }
    let mut loops = Vec::with_capacity(raw_loops.len());
    for lp in raw_loops {
        let mut seq = Vec::with_capacity(lp.len());
        for (offset, line, i) in lp {
            if i >= balls.len() {
                return Err(err(offset, line, format!("ball index {i} out of range ({} balls)", balls.len())));
            }
            seq.push(i);
        }
        loops.push(seq);
    }
    Ok(CoverSpec { balls, loops })
}

// ---------------------------------------------------------------------------
// run configuration

/// Flat key-value configuration with `[section]` headers. Keys are the first
/// token of a line; the value is the remainder of the line, so values may
/// contain spaces (e.g. paths). Duplicate keys within a section are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // (section, key) -> (value, line, byte offset of the value)
    entries: BTreeMap<(String, String), (String, usize, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ParseError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lno, off, line) in content_lines(text) {
            let t = line.trim();
            if let Some(inner) = t.strip_prefix('[') {
                let Some(name) = inner.strip_suffix(']') else {
                    return Err(err(off, lno, format!("unterminated section header `{t}`")));
                };
                let name = name.trim();
                if name.is_empty() || name.contains('[') || name.contains(']') {
                    return Err(err(off, lno, format!("malformed section name `{t}`")));
                }
                section = name.to_string();
                continue;
            }
            let tk = tokens(line);
            let (koff, key) = tk[0];
            let value = line[koff + key.len()..].trim();
            let value_off = match tk.get(1) {
                Some((voff, _)) => off + voff,
                None => off + koff + key.len(),
            };
            let slot = (section.clone(), key.to_string());
            if entries.contains_key(&slot) {
                return Err(err(
                    off + koff,
                    lno,
                    format!("duplicate key `{key}` in section [{section}]"),
                ));
            }
            entries.insert(slot, (value.to_string(), lno, value_off));
        }
        Ok(Config { entries })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|(v, _, _)| v.as_str())
    }

    /// The value for a key that must be present.
    pub fn require(&self, section: &str, key: &str) -> Result<&str, ParseError> {
        self.get(section, key)
            .ok_or_else(|| err(0, 0, format!("missing required key `{key}` in section [{section}]")))
    }

    fn lookup(&self, section: &str, key: &str) -> Option<&(String, usize, usize)> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn parse_value<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        what: &str,
    ) -> Result<Option<T>, ParseError> {
        let Some((value, lno, voff)) = self.lookup(section, key) else {
            return Ok(None);
        };
        match value.parse::<T>() {
            Ok(v) => Ok(Some(v)),
            Err(_) => Err(err(
                *voff,
                *lno,
                format!("key `{key}` in section [{section}]: expected {what}, found `{value}`"),
            )),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ParseError> {
        let v = self.parse_value::<f64>(section, key, "a number")?;
        if let Some(x) = v {
            if !x.is_finite() {
                let (value, lno, voff) = self.lookup(section, key).expect("present");
                return Err(err(
                    *voff,
                    *lno,
                    format!("key `{key}` in section [{section}]: value must be finite, found `{value}`"),
                ));
            }
        }
        Ok(v)
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64, ParseError> {
        self.require(section, key)?;
        Ok(self.get_f64(section, key)?.expect("present"))
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>, ParseError> {
        self.parse_value::<u64>(section, key, "a nonnegative integer")
    }

    pub fn require_u64(&self, section: &str, key: &str) -> Result<u64, ParseError> {
        self.require(section, key)?;
        Ok(self.get_u64(section, key)?.expect("present"))
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>, ParseError> {
        self.parse_value::<usize>(section, key, "a nonnegative integer")
    }
}

// ---------------------------------------------------------------------------
// synthesis manifests

/// One synthesized rectangle: which ball it belongs to, where its spectrum
/// file lives (relative to the manifest), and the analytic chart
/// differential at its center for later comparison against fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRect {
    pub ball: usize,
    pub center: [f64; 2],
    pub half_width: [f64; 2],
    pub file: String,
    pub diff: [[f64; 2]; 2],
}

/// Index of a synthesis run: shared rectangle parameters plus one record per
/// synthesized rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub model_name: String,
    pub eps: f64,
    pub h: f64,
    pub delta: f64,
    pub seed: u64,
    pub rects: Vec<ManifestRect>,
}

impl Manifest {
    /// Rebuilds the rectangle of a record using the shared run parameters.
    pub fn rectangle(&self, r: &ManifestRect) -> GoodRectangle {
        GoodRectangle {
            center: C64::new(r.center[0], r.center[1]),
            half_width: r.half_width,
            eps: self.eps,
            h: self.h,
            delta: self.delta,
        }
    }
}

/// Serializes a manifest: `manifest v1`, header keys, then one `rect` line
/// per rectangle. Spectrum file names must not contain whitespace.
pub fn write_manifest(m: &Manifest) -> String {
    let mut out = String::from("manifest v1\n");
    out.push_str(&format!("model {}\n", m.model_name));
    out.push_str(&format!("eps {}\n", fmt_f64(m.eps)));
    out.push_str(&format!("h {}\n", fmt_f64(m.h)));
    out.push_str(&format!("delta {}\n", fmt_f64(m.delta)));
    out.push_str(&format!("seed {}\n", m.seed));
    for (i, r) in m.rects.iter().enumerate() {
        debug_assert!(!r.file.chars().any(char::is_whitespace), "file names must be token-safe");
        out.push_str(&format!(
            "rect {i} ball {} center {} {} halfwidth {} {} file {} diff {} {} {} {}\n",
            r.ball,
            fmt_f64(r.center[0]),
            fmt_f64(r.center[1]),
            fmt_f64(r.half_width[0]),
            fmt_f64(r.half_width[1]),
            r.file,
            fmt_f64(r.diff[0][0]),
            fmt_f64(r.diff[0][1]),
            fmt_f64(r.diff[1][0]),
            fmt_f64(r.diff[1][1]),
        ));
    }
    out
}

/// Reads the format written by [`write_manifest`]. Rectangle indices must be
/// sequential from zero.
pub fn parse_manifest(text: &str) -> Result<Manifest, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `manifest v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 2, "`manifest v1` header")?;
    tag(tk[0], off, lno, "manifest")?;
    tag(tk[1], off, lno, "v1")?;

    let mut model_name: Option<String> = None;
    let mut eps: Option<f64> = None;
    let mut h: Option<f64> = None;
    let mut delta: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut rects = Vec::new();

    for (lno, off, line) in lines {
        let tk = tokens(line);
        match tk[0].1 {
            "model" => {
                count(&tk, off, lno, 2, "`model <name>`")?;
                if model_name.replace(tk[1].1.to_string()).is_some() {
                    return Err(err(off, lno, "duplicate `model` line".into()));
                }
            }
            "eps" => {
                count(&tk, off, lno, 2, "`eps <value>`")?;
                let v = finite(tk[1], off, lno, "eps")?;
                if v <= 0.0 {
                    return Err(err(off + tk[1].0, lno, format!("eps must be positive, found {v}")));
                }
                if eps.replace(v).is_some() {
                    return Err(err(off, lno, "duplicate `eps` line".into()));
                }
            }
            "h" => {
                count(&tk, off, lno, 2, "`h <value>`")?;
                let v = finite(tk[1], off, lno, "h")?;
                if v <= 0.0 {
                    return Err(err(off + tk[1].0, lno, format!("h must be positive, found {v}")));
                }
                if h.replace(v).is_some() {
                    return Err(err(off, lno, "duplicate `h` line".into()));
                }
            }
            "delta" => {
                count(&tk, off, lno, 2, "`delta <value>`")?;
                let v = finite(tk[1], off, lno, "delta")?;
                if v <= 0.0 || v >= 1.0 {
                    return Err(err(off + tk[1].0, lno, format!("delta must lie in (0, 1), found {v}")));
                }
                if delta.replace(v).is_some() {
                    return Err(err(off, lno, "duplicate `delta` line".into()));
                }
            }
            "seed" => {
                count(&tk, off, lno, 2, "`seed <value>`")?;
                let v: u64 = num(tk[1], off, lno, "seed (nonnegative integer)")?;
                if seed.replace(v).is_some() {
                    return Err(err(off, lno, "duplicate `seed` line".into()));
                }
            }
            "rect" => {
                count(&tk, off, lno, 17, "`rect <i> ball <b> center <2> halfwidth <2> file <f> diff <4>`")?;
                let idx: usize = num(tk[1], off, lno, "rectangle index (nonnegative integer)")?;
                if idx != rects.len() {
                    return Err(err(
                        off + tk[1].0,
                        lno,
                        format!("rectangle index {idx} out of order (expected {})", rects.len()),
                    ));
                }
                tag(tk[2], off, lno, "ball")?;
                let ball: usize = num(tk[3], off, lno, "ball index (nonnegative integer)")?;
                tag(tk[4], off, lno, "center")?;
                let center = [finite(tk[5], off, lno, "center re")?, finite(tk[6], off, lno, "center im")?];
                tag(tk[7], off, lno, "halfwidth")?;
                let half_width =
                    [finite(tk[8], off, lno, "half-width re")?, finite(tk[9], off, lno, "half-width im")?];
                if half_width[0] <= 0.0 || half_width[1] <= 0.0 {
                    return Err(err(off + tk[8].0, lno, "half-widths must be positive".into()));
                }
                tag(tk[10], off, lno, "file")?;
                let file = tk[11].1.to_string();
                tag(tk[12], off, lno, "diff")?;
                let diff = [
                    [finite(tk[13], off, lno, "diff entry")?, finite(tk[14], off, lno, "diff entry")?],
                    [finite(tk[15], off, lno, "diff entry")?, finite(tk[16], off, lno, "diff entry")?],
                ];
                rects.push(ManifestRect { ball, center, half_width, file, diff });
            }
            other => return Err(err(off + tk[0].0, lno, format!("unknown manifest key `{other}`"))),
        }
    }

    let model_name = model_name.ok_or_else(|| err(0, 0, "missing `model` line".into()))?;
    let eps = eps.ok_or_else(|| err(0, 0, "missing `eps` line".into()))?;
    let h = h.ok_or_else(|| err(0, 0, "missing `h` line".into()))?;
    let delta = delta.ok_or_else(|| err(0, 0, "missing `delta` line".into()))?;
    let seed = seed.ok_or_else(|| err(0, 0, "missing `seed` line".into()))?;
    Ok(Manifest { model_name, eps, h, delta, seed, rects })
}

// ---------------------------------------------------------------------------
// chart reports

/// Outcome of fitting one rectangle: an accepted chart, or the reason the
/// fit was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartRecord {
    Accepted { ball: usize, chart: MicroChart },
    Rejected { ball: usize, center: [f64; 2], reason: String },
}

/// All fit outcomes of a run, in rectangle order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChartReport {
    pub records: Vec<ChartRecord>,
}

impl ChartReport {
    /// Accepted charts of one ball, in record order.
    pub fn accepted_for(&self, ball: usize) -> Vec<&MicroChart> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ChartRecord::Accepted { ball: b, chart } if *b == ball => Some(chart),
                _ => None,
            })
            .collect()
    }
}

/// Serializes a chart report: one `chart` line per accepted fit carrying the
/// full rectangle and affine data, one `rejected` line per failed fit with
/// the reason as free text.
pub fn write_chart_report(report: &ChartReport) -> String {
    let mut out = String::from("chartreport v1\n");
    for rec in &report.records {
        match rec {
            ChartRecord::Accepted { ball, chart } => {
                let r = &chart.rect;
                out.push_str(&format!(
                    "chart ball {ball} center {} {} halfwidth {} {} eps {} h {} delta {} residual {} diff {} {} {} {} offset {} {}\n",
                    fmt_f64(r.center.re),
                    fmt_f64(r.center.im),
                    fmt_f64(r.half_width[0]),
                    fmt_f64(r.half_width[1]),
                    fmt_f64(r.eps),
                    fmt_f64(r.h),
                    fmt_f64(r.delta),
                    fmt_f64(chart.fit_residual),
                    fmt_f64(chart.f0_diff[0][0]),
                    fmt_f64(chart.f0_diff[0][1]),
                    fmt_f64(chart.f0_diff[1][0]),
                    fmt_f64(chart.f0_diff[1][1]),
                    fmt_f64(chart.f0_offset[0]),
                    fmt_f64(chart.f0_offset[1]),
                ));
            }
            ChartRecord::Rejected { ball, center, reason } => {
                let flat = reason.replace('\n', " ");
                out.push_str(&format!(
                    "rejected ball {ball} center {} {} reason {flat}\n",
                    fmt_f64(center[0]),
                    fmt_f64(center[1]),
                ));
            }
        }
    }
    out
}

/// Reads the format written by [`write_chart_report`].
pub fn parse_chart_report(text: &str) -> Result<ChartReport, ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `chartreport v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 2, "`chartreport v1` header")?;
    tag(tk[0], off, lno, "chartreport")?;
    tag(tk[1], off, lno, "v1")?;

    let mut records = Vec::new();
    for (lno, off, line) in lines {
        let tk = tokens(line);
        match tk[0].1 {
            "chart" => {
                count(&tk, off, lno, 25, "`chart ball <b> center <2> halfwidth <2> eps <e> h <h> delta <d> residual <r> diff <4> offset <2>`")?;
                tag(tk[1], off, lno, "ball")?;
                let ball: usize = num(tk[2], off, lno, "ball index (nonnegative integer)")?;
                tag(tk[3], off, lno, "center")?;
                let c = [finite(tk[4], off, lno, "center re")?, finite(tk[5], off, lno, "center im")?];
                tag(tk[6], off, lno, "halfwidth")?;
                let hw = [finite(tk[7], off, lno, "half-width")?, finite(tk[8], off, lno, "half-width")?];
                tag(tk[9], off, lno, "eps")?;
                let eps = finite(tk[10], off, lno, "eps")?;
                tag(tk[11], off, lno, "h")?;
                let h = finite(tk[12], off, lno, "h")?;
                tag(tk[13], off, lno, "delta")?;
                let delta = finite(tk[14], off, lno, "delta")?;
                tag(tk[15], off, lno, "residual")?;
                let residual = finite(tk[16], off, lno, "residual")?;
                tag(tk[17], off, lno, "diff")?;
                let diff = [
                    [finite(tk[18], off, lno, "diff entry")?, finite(tk[19], off, lno, "diff entry")?],
                    [finite(tk[20], off, lno, "diff entry")?, finite(tk[21], off, lno, "diff entry")?],
                ];
                tag(tk[22], off, lno, "offset")?;
                let offset = [finite(tk[23], off, lno, "offset entry")?, finite(tk[24], off, lno, "offset entry")?];
                if hw[0] <= 0.0 || hw[1] <= 0.0 || eps <= 0.0 || h <= 0.0 {
                    return Err(err(off, lno, "rectangle parameters must be positive".into()));
                }
                let rect = GoodRectangle {
                    center: C64::new(c[0], c[1]),
                    half_width: hw,
                    eps,
                    h,
                    delta,
                };
                records.push(ChartRecord::Accepted {
                    ball,
                    chart: MicroChart { rect, f0_diff: diff, f0_offset: offset, fit_residual: residual },
                });
            }
            "rejected" => {
                if tk.len() < 8 {
                    return Err(err(off, lno, "expected `rejected ball <b> center <2> reason <text>`".into()));
                }
                tag(tk[1], off, lno, "ball")?;
                let ball: usize = num(tk[2], off, lno, "ball index (nonnegative integer)")?;
                tag(tk[3], off, lno, "center")?;
                let c = [finite(tk[4], off, lno, "center re")?, finite(tk[5], off, lno, "center im")?];
                tag(tk[6], off, lno, "reason")?;
                let reason = line[tk[6].0 + tk[6].1.len()..].trim().to_string();
                records.push(ChartRecord::Rejected { ball, center: c, reason });
            }
            other => return Err(err(off + tk[0].0, lno, format!("unknown chart record `{other}`"))),
        }
    }
    Ok(ChartReport { records })
}

// ---------------------------------------------------------------------------
// holonomy reports

/// One pairwise overlap: the constant transition matrix, how many chart
/// pairs witnessed it, and the worst rounding residual among them.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRecord {
    pub pair: [usize; 2],
    pub matrix: IMat2,
    pub pairs: usize,
    pub max_residual: f64,
}

/// One requested loop: its holonomy class and, when an expected matrix was
/// supplied, whether the class matches it up to conjugacy.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecord {
    pub balls: Vec<usize>,
    pub class: HolonomyClass,
    pub expected: Option<(IMat2, bool)>,
}

/// The full monodromy summary written by the monodromy pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HolonomyReport {
    pub overlaps: Vec<OverlapRecord>,
    pub loops: Vec<LoopRecord>,
}

fn fmt_imat(m: &IMat2) -> String {
    format!("{} {} {} {}", m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1])
}

/// Serializes a holonomy report (write-only: the report is a terminal
/// artifact, consumed by humans and assertions, not re-parsed).
pub fn write_holonomy_report(report: &HolonomyReport) -> String {
    let mut out = String::from("holonomy v1\n");
    for o in &report.overlaps {
        out.push_str(&format!(
            "overlap {} {} pairs {} residual {} matrix {}\n",
            o.pair[0],
            o.pair[1],
            o.pairs,
            fmt_f64(o.max_residual),
            fmt_imat(&o.matrix)
        ));
    }
    for (i, l) in report.loops.iter().enumerate() {
        out.push_str(&format!("loop {i} balls"));
        for &b in &l.balls {
            out.push_str(&format!(" {b}"));
        }
        out.push_str(&format!(
            " matrix {} trace {} det {}\n",
            fmt_imat(&l.class.representative),
            l.class.trace,
            l.class.det
        ));
        if let Some((want, ok)) = &l.expected {
            out.push_str(&format!(
                "loop {i} verdict expected {} conjugate {}\n",
                fmt_imat(want),
                if *ok { "yes" } else { "no" }
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// joint matrix pairs

/// Serializes a real symmetric pair: header `jointpair v1 <n>`, then the two
/// matrices row by row, A1 first.
pub fn write_jointpair(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> String {
    assert_eq!(a1.nrows(), a1.ncols(), "a1 must be square");
    assert_eq!(a1.shape(), a2.shape(), "a1 and a2 must have equal shape");
    let n = a1.nrows();
    let mut out = format!("jointpair v1 {n}\n");
    for m in [a1, a2] {
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| fmt_f64(m[(i, j)])).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Reads the format written by [`write_jointpair`]. The dimension is capped
/// at [`MAX_JOINTPAIR_DIM`].
pub fn parse_jointpair(text: &str) -> Result<(DMatrix<f64>, DMatrix<f64>), ParseError> {
    let mut lines = content_lines(text);
    let Some((lno, off, line)) = lines.next() else {
        return Err(err(0, 0, "empty input: missing `jointpair v1` header".into()));
    };
    let tk = tokens(line);
    count(&tk, off, lno, 3, "`jointpair v1 <n>` header")?;
    tag(tk[0], off, lno, "jointpair")?;
    tag(tk[1], off, lno, "v1")?;
    let n: usize = num(tk[2], off, lno, "dimension (nonnegative integer)")?;
    if n == 0 {
        return Err(err(off + tk[2].0, lno, "dimension must be positive".into()));
    }
    if n > MAX_JOINTPAIR_DIM {
        return Err(err(
            off + tk[2].0,
            lno,
            format!("dimension {n} exceeds the supported maximum {MAX_JOINTPAIR_DIM}"),
        ));
    }

    let mut mats = [DMatrix::<f64>::zeros(n, n), DMatrix::<f64>::zeros(n, n)];
    for (which, name) in ["A1", "A2"].iter().enumerate() {
        for i in 0..n {
            let Some((lno, off, line)) = lines.next() else {
                return Err(err(text.len(), 0, format!("truncated input: missing row {i} of {name}")));
            };
            let tk = tokens(line);
            count(&tk, off, lno, n, "matrix row")?;
            for (j, &t) in tk.iter().enumerate() {
                mats[which][(i, j)] = finite(t, off, lno, "matrix entry")?;
            }
        }
    }
    if let Some((lno, off, _)) = lines.next() {
        return Err(err(off, lno, "trailing data after both matrices".into()));
    }
    let [a1, a2] = mats;
    Ok((a1, a2))
}

// ---------------------------------------------------------------------------
// SVG scatter

const SVG_PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const SVG_MARGIN: f64 = 40.0;

/// Renders points (colored by ball index through a fixed 8-color palette)
/// and optional rectangle outlines ((center, half-width) pairs in the same
/// coordinates) to a standalone 800x600 SVG. Uniform scaling, y axis up.
pub fn write_svg_scatter(points: &[([f64; 2], usize)], boxes: &[([f64; 2], [f64; 2])]) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |p: [f64; 2]| {
        for i in 0..2 {
            if p[i].is_finite() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
    };
    for (p, _) in points {
        grow(*p);
    }
    for (c, hw) in boxes {
        grow([c[0] - hw[0], c[1] - hw[1]]);
        grow([c[0] + hw[0], c[1] + hw[1]]);
    }
    for i in 0..2 {
        if !lo[i].is_finite() || !hi[i].is_finite() {
            lo[i] = -1.0;
            hi[i] = 1.0;
        }
        if hi[i] - lo[i] < 1e-12 {
            lo[i] -= 0.5;
            hi[i] += 0.5;
        }
    }
    let s = ((SVG_W - 2.0 * SVG_MARGIN) / (hi[0] - lo[0]))
        .min((SVG_H - 2.0 * SVG_MARGIN) / (hi[1] - lo[1]));
    let pad_x = (SVG_W - 2.0 * SVG_MARGIN - (hi[0] - lo[0]) * s) / 2.0;
    let pad_y = (SVG_H - 2.0 * SVG_MARGIN - (hi[1] - lo[1]) * s) / 2.0;
    let px = |x: f64| SVG_MARGIN + pad_x + (x - lo[0]) * s;
    let py = |y: f64| SVG_H - SVG_MARGIN - pad_y - (y - lo[1]) * s;

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"#ffffff\"/>\n"
    ));
    for (c, hw) in boxes {
        let x0 = px(c[0] - hw[0]);
        let y0 = py(c[1] + hw[1]);
        let w = px(c[0] + hw[0]) - x0;
        let h = py(c[1] - hw[1]) - y0;
        out.push_str(&format!(
            "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
        ));
    }
    for (p, ball) in points {
        let color = SVG_PALETTE[ball % SVG_PALETTE.len()];
        out.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2.5\" fill=\"{color}\"/>\n",
            px(p[0]),
            py(p[1])
        ));
    }
    out.push_str("</svg>\n");
    out
}

// ---------------------------------------------------------------------------
// file wrappers

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path)
        .map_err(|e| IoError::Read { path: path.display().to_string(), message: e.to_string() })
}

/// Writes raw text (used for reports and SVG output).
pub fn save_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text)
        .map_err(|e| IoError::Write { path: path.display().to_string(), message: e.to_string() })
}

fn lift<T>(path: &Path, r: Result<T, ParseError>) -> Result<T, IoError> {
    r.map_err(|error| IoError::Parse { path: path.display().to_string(), error })
}

pub fn load_formalseries(path: &Path) -> Result<FormalSeries, IoError> {
    let text = read_file(path)?;
    lift(path, parse_formalseries(&text))
}

pub fn save_formalseries(path: &Path, series: &FormalSeries) -> Result<(), IoError> {
    save_text(path, &write_formalseries(series))
}

pub fn load_spectrum(path: &Path) -> Result<SpectrumCloud, IoError> {
    let text = read_file(path)?;
    lift(path, parse_spectrum(&text, &path.display().to_string()))
}

pub fn save_spectrum(path: &Path, cloud: &SpectrumCloud) -> Result<(), IoError> {
    save_text(path, &write_spectrum(cloud))
}

pub fn load_model(path: &Path) -> Result<ModelSystem, IoError> {
    let text = read_file(path)?;
    lift(path, parse_model(&text))
}

pub fn save_model(path: &Path, model: &ModelSystem) -> Result<(), IoError> {
    save_text(path, &write_model(model))
}

pub fn load_cover(path: &Path) -> Result<CoverSpec, IoError> {
    let text = read_file(path)?;
    lift(path, parse_cover(&text))
}

pub fn save_cover(path: &Path, cover: &CoverSpec) -> Result<(), IoError> {
    save_text(path, &write_cover(cover))
}

pub fn load_config(path: &Path) -> Result<Config, IoError> {
    let text = read_file(path)?;
    lift(path, Config::parse(&text))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IoError> {
    let text = read_file(path)?;
    lift(path, parse_manifest(&text))
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    save_text(path, &write_manifest(manifest))
}

pub fn load_chart_report(path: &Path) -> Result<ChartReport, IoError> {
    let text = read_file(path)?;
    lift(path, parse_chart_report(&text))
}

pub fn save_chart_report(path: &Path, report: &ChartReport) -> Result<(), IoError> {
    save_text(path, &write_chart_report(report))
}

pub fn load_jointpair(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>), IoError> {
    let text = read_file(path)?;
    lift(path, parse_jointpair(&text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_f64(rng: &mut ChaCha8Rng) -> f64 {
        let mantissa: f64 = rng.gen_range(-1.0..1.0);
        let exp: i32 = rng.gen_range(-12..12);
        mantissa * 10f64.powi(exp)
    }

    #[test]
    fn formalseries_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..25 {
            let mut s = FormalSeries::zero(8, 5);
            for _ in 0..rng.gen_range(0..30) {
                let d = Multidegree::new(
                    rng.gen_range(0..4),
                    rng.gen_range(0..4),
                    rng.gen_range(0..2),
                    rng.gen_range(0..2),
                );
                let k = [rng.gen_range(-5..=5), rng.gen_range(-5..=5)];
                let c = C64::new(random_f64(&mut rng), random_f64(&mut rng));
                s.add_term(d, k, c).unwrap();
            }
            let text = write_formalseries(&s);
            let back = parse_formalseries(&text).unwrap();
            let a: Vec<_> = s.iter_terms().collect();
            let b: Vec<_> = back.iter_terms().collect();
            assert_eq!(a.len(), b.len());
            for ((da, ka, ca), (db, kb, cb)) in a.iter().zip(&b) {
                assert_eq!(da, db);
                assert_eq!(ka, kb);
                assert_eq!(ca.re.to_bits(), cb.re.to_bits());
                assert_eq!(ca.im.to_bits(), cb.im.to_bits());
            }
            // writing the re-parsed series reproduces the bytes
            assert_eq!(text, write_formalseries(&back));
        }
    }

    #[test]
    fn formalseries_rejects_corruption_with_offset() {
        let good = "formalseries v1 6 4\n2 0 0 1 -1 2 1.5e0 0.0e0\n";
        parse_formalseries(good).unwrap();

        let bad = "formalseries v1 6 4\n2 0 0 1 -1 2 1.5e0 0.0e0\n2 0 0 1 -1 oops 1.0e0 0.0e0\n";
        let e = parse_formalseries(bad).unwrap_err();
        assert_eq!(e.offset, bad.find("oops").unwrap());
        assert_eq!(e.line, 3);
        assert!(e.message.contains("oops"));

        // mode past the declared cut is located at the mode tokens
        let cut = "formalseries v1 6 4\n0 0 0 0 5 0 1.0e0 0.0e0\n";
        let e = parse_formalseries(cut).unwrap_err();
        assert_eq!(e.offset, cut.rfind("5 0").unwrap());
        assert!(e.message.contains("Fourier cut"));

        // weight past the declared cut
        let heavy = "formalseries v1 3 4\n4 0 0 0 0 0 1.0e0 0.0e0\n";
        assert!(parse_formalseries(heavy).unwrap_err().message.contains("weight"));

        // short line
        let short = "formalseries v1 6 4\n1 2 3\n";
        let e = parse_formalseries(short).unwrap_err();
        assert_eq!(e.offset, short.find("1 2 3").unwrap());

        // non-finite coefficient
        let inf = "formalseries v1 6 4\n0 0 0 0 0 0 inf 0.0e0\n";
        assert!(parse_formalseries(inf).unwrap_err().message.contains("finite"));
    }

    #[test]
    fn formalseries_header_errors() {
        assert!(parse_formalseries("").unwrap_err().message.contains("header"));
        assert!(parse_formalseries("spectral v1 6 4\n").is_err());
        assert!(parse_formalseries("formalseries v2 6 4\n").is_err());
        assert!(parse_formalseries("formalseries v1 6 -1\n").unwrap_err().message.contains("nonnegative"));
        // comments and blank lines are fine anywhere
        let commented = "# series dump\n\nformalseries v1 6 4\n# body\n1 0 0 0 0 0 2.0e0 0.0e0\n";
        assert_eq!(parse_formalseries(commented).unwrap().num_terms(), 1);
    }

    #[test]
    fn spectrum_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..20 {
            let n = rng.gen_range(0..40);
            let points: Vec<C64> =
                (0..n).map(|_| C64::new(random_f64(&mut rng), random_f64(&mut rng))).collect();
            let cloud = SpectrumCloud {
                points,
                eps: rng.gen_range(1e-4..1e-1),
                h: rng.gen_range(1e-6..1e-2),
                provenance: Provenance::Synthetic { seed: 1 },
            };
            let text = write_spectrum(&cloud);
            let back = parse_spectrum(&text, "mem").unwrap();
            assert_eq!(back.eps.to_bits(), cloud.eps.to_bits());
            assert_eq!(back.h.to_bits(), cloud.h.to_bits());
            assert_eq!(back.points.len(), cloud.points.len());
            for (a, b) in cloud.points.iter().zip(&back.points) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
            assert_eq!(back.provenance, Provenance::File { path: "mem".into() });
            assert_eq!(text, write_spectrum(&back));
        }
    }

    #[test]
    fn spectrum_corruption_reports_byte_offset() {
        let text = "spectrum v1 eps 1.0e-2 h 1.0e-3\n1.0e0 2.0e0\n3.0e0 garbage\n";
        let e = parse_spectrum(text, "mem").unwrap_err();
        assert_eq!(e.offset, text.find("garbage").unwrap());
        assert_eq!(e.line, 3);

        let threecol = "spectrum v1 eps 1.0e-2 h 1.0e-3\n1.0 2.0 3.0\n";
        let e = parse_spectrum(threecol, "mem").unwrap_err();
        assert_eq!(e.offset, threecol.find("1.0 2.0 3.0").unwrap());

        let badh = "spectrum v1 eps 1.0e-2 h 0.0e0\n";
        let e = parse_spectrum(badh, "mem").unwrap_err();
        assert_eq!(e.offset, badh.find("0.0e0").unwrap());
        assert!(e.message.contains("positive"));

        assert!(parse_spectrum("", "mem").unwrap_err().message.contains("header"));
    }

    #[test]
    fn model_round_trips_all_builtins() {
        let models = [
            ModelSystem::new(ModelMap::Identity, [0.2, -0.05], [1, 0], 0.5),
            ModelSystem::new(ModelMap::Twist { gamma: 1.25 }, [0.0, 0.0], [2, 3], 0.4),
            ModelSystem::new(
                ModelMap::FocusFocusSector { rmin: 0.05, rmax: 0.3, anchor: 1.0 },
                [0.1, 0.2],
                [-1, 2],
                0.55,
            ),
        ];
        for m in models {
            let text = write_model(&m);
            let back = parse_model(&text).unwrap();
            assert_eq!(back.map, m.map);
            assert_eq!(back.tau_c, m.tau_c);
            assert_eq!(back.maslov, m.maslov);
            assert_eq!(back.delta, m.delta);
            assert_eq!(text, write_model(&back));
        }
    }

    #[test]
    fn model_validation_failures() {
        let base = "model v1\nphi twist\ngamma 1.0e0\ntau_c 0.0e0 0.0e0\nmaslov_k 0 0\ndelta 5.0e-1\n";
        parse_model(base).unwrap();

        // invalid delta
        let e = parse_model(&base.replace("delta 5.0e-1", "delta 1.5e0")).unwrap_err();
        assert!(e.message.contains("(0, 1)"));
        // missing parameter for the chosen map
        let e = parse_model(&base.replace("gamma 1.0e0\n", "")).unwrap_err();
        assert!(e.message.contains("gamma"));
        // parameter of the wrong map
        let e = parse_model(&base.replace("phi twist", "phi identity")).unwrap_err();
        assert!(e.message.contains("only valid"));
        // unknown key with position
        let bad = base.replace("maslov_k 0 0", "maslov 0 0");
        let e = parse_model(&bad).unwrap_err();
        assert_eq!(e.offset, bad.find("maslov 0 0").unwrap());
        // duplicate key
        let e = parse_model(&format!("{base}delta 5.0e-1\n")).unwrap_err();
        assert!(e.message.contains("duplicate"));
        // unknown map name
        let e = parse_model(&base.replace("phi twist", "phi pendulum")).unwrap_err();
        assert!(e.message.contains("pendulum"));
        // focus-focus annulus outside the contraction domain
        let ff = "model v1\nphi focusfocus-sector\nrmin 1.0e-1\nrmax 4.0e-1\nanchor 0.0e0\ntau_c 0.0e0 0.0e0\nmaslov_k 0 0\ndelta 5.0e-1\n";
        let e = parse_model(ff).unwrap_err();
        assert!(e.message.contains("1/e"));
    }

    #[test]
    fn cover_round_trip_and_validation() {
        let cover = CoverSpec {
            balls: vec![
                Ball { center: [0.3, 0.0], radius: 0.12 },
                Ball { center: [0.0, 0.3], radius: 0.12 },
                Ball { center: [-0.3, 0.0], radius: 0.12 },
                Ball { center: [0.0, -0.3], radius: 0.12 },
            ],
            loops: vec![vec![0, 1, 2, 3], vec![0, 1, 0, 1]],
        };
        let text = write_cover(&cover);
        let back = parse_cover(&text).unwrap();
        assert_eq!(back, cover);
        assert_eq!(text, write_cover(&back));

        let bad = format!("{text}loop 0 9\n");
        let e = parse_cover(&bad).unwrap_err();
        assert_eq!(e.offset, bad.rfind('9').unwrap());
        assert!(e.message.contains("out of range"));

        let e = parse_cover("cover v1\nball 0.0e0 0.0e0 -1.0e0\n").unwrap_err();
        assert!(e.message.contains("positive"));
        let e = parse_cover("cover v1\nsphere 0 0 1\n").unwrap_err();
        assert!(e.message.contains("sphere"));
    }

    #[test]
    fn ball_geometry_helpers() {
        let a = Ball { center: [0.0, 0.0], radius: 1.0 };
        let b = Ball { center: [1.5, 0.0], radius: 1.0 };
        let c = Ball { center: [3.0, 0.0], radius: 1.0 };
        assert!(a.overlaps(&b));
        assert!(b.overlaps(&c));
        assert!(!a.overlaps(&c));
        assert!(a.contains([0.5, 0.5]));
        assert!(!a.contains([1.0, 1.0]));
    }

    #[test]
    fn config_sections_and_diagnostics() {
        let text = "\
# run configuration
[run]
model models/twist with space.model
h 1.0e-3
seed 42

[monodromy]
expected 1 1 0 1
";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.get("run", "model"), Some("models/twist with space.model"));
        assert_eq!(cfg.require_f64("run", "h").unwrap(), 1.0e-3);
        assert_eq!(cfg.require_u64("run", "seed").unwrap(), 42);
        assert_eq!(cfg.get("monodromy", "expected"), Some("1 1 0 1"));
        assert_eq!(cfg.get("run", "absent"), None);

        let e = cfg.require("run", "alpha").unwrap_err();
        assert!(e.message.contains("alpha") && e.message.contains("[run]"));

        let bad = "[run]\nh not-a-number\n";
        let cfg = Config::parse(bad).unwrap();
        let e = cfg.require_f64("run", "h").unwrap_err();
        assert_eq!(e.offset, bad.find("not-a-number").unwrap());
        assert_eq!(e.line, 2);

        let dup = "[run]\nh 1.0\nh 2.0\n";
        let e = Config::parse(dup).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("duplicate"));

        assert!(Config::parse("[run\nh 1.0\n").unwrap_err().message.contains("unterminated"));
        assert!(Config::parse("[]\n").unwrap_err().message.contains("malformed"));

        // top-level keys live in the unnamed section
        let top = Config::parse("x 7\n").unwrap();
        assert_eq!(top.get("", "x"), Some("7"));
    }

    #[test]
    fn manifest_round_trip_and_order_check() {
        let m = Manifest {
            model_name: "twist".into(),
            eps: 0.0316,
            h: 1.0e-3,
            delta: 0.5,
            seed: 7,
            rects: vec![
                ManifestRect {
                    ball: 0,
                    center: [0.3, 0.001],
                    half_width: [0.0079, 0.00025],
                    file: "rect_000.spectrum".into(),
                    diff: [[1.0, -1.3], [0.0, 1.0]],
                },
                ManifestRect {
                    ball: 1,
                    center: [0.31, -0.002],
                    half_width: [0.0079, 0.00025],
                    file: "rect_001.spectrum".into(),
                    diff: [[1.0, -1.31], [0.0, 1.0]],
                },
            ],
        };
        let text = write_manifest(&m);
        let back = parse_manifest(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(text, write_manifest(&back));

        let shuffled = text.replace("rect 1 ", "rect 5 ");
        let e = parse_manifest(&shuffled).unwrap_err();
        assert!(e.message.contains("out of order"));

        let missing = text.replace("seed 7\n", "");
        assert!(parse_manifest(&missing).unwrap_err().message.contains("seed"));

        let dup = text.replace("h 1.", "eps 1.");
        assert!(parse_manifest(&dup).unwrap_err().message.contains("duplicate"));
    }

    #[test]
    fn chart_report_round_trip() {
        let rect = GoodRectangle {
            center: C64::new(0.3, 0.002),
            half_width: [0.0079, 0.00025],
            eps: 0.0316,
            h: 1.0e-3,
            delta: 0.5,
        };
        let report = ChartReport {
            records: vec![
                ChartRecord::Accepted {
                    ball: 2,
                    chart: MicroChart {
                        rect: rect.clone(),
                        f0_diff: [[1.0, -1.3], [0.0, 1.0]],
                        f0_offset: [0.21, 0.05],
                        fit_residual: 3.2e-13,
                    },
                },
                ChartRecord::Rejected {
                    ball: 3,
                    center: [0.1, -0.04],
                    reason: "no lattice structure: relative residual 2.1e-1 exceeds 5.0e-2".into(),
                },
            ],
        };
        let text = write_chart_report(&report);
        let back = parse_chart_report(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(text, write_chart_report(&back));
        assert_eq!(back.accepted_for(2).len(), 1);
        assert_eq!(back.accepted_for(3).len(), 0);

        let bad = text.replace("residual 3.2", "residual x3.2");
        let e = parse_chart_report(&bad).unwrap_err();
        assert_eq!(e.offset, bad.find("x3.2").unwrap());
    }

    #[test]
    fn holonomy_report_is_deterministic_text() {
        let report = HolonomyReport {
            overlaps: vec![OverlapRecord {
                pair: [0, 1],
                matrix: IMat2::new(1, 1, 0, 1),
                pairs: 10,
                max_residual: 2.5e-13,
            }],
            loops: vec![LoopRecord {
                balls: vec![0, 1, 2, 3],
                class: HolonomyClass::of(IMat2::new(1, 1, 0, 1)),
                expected: Some((IMat2::new(1, 0, 1, 1), true)),
            }],
        };
        let a = write_holonomy_report(&report);
        let b = write_holonomy_report(&report);
        assert_eq!(a, b);
        assert!(a.starts_with("holonomy v1\n"));
        assert!(a.contains("overlap 0 1 pairs 10"));
        assert!(a.contains("matrix 1 1 0 1"));
        assert!(a.contains("trace 2 det 1"));
        assert!(a.contains("verdict expected 1 0 1 1 conjugate yes"));
    }

    #[test]
    fn jointpair_round_trip_and_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..10 {
            let n = rng.gen_range(1..6);
            let a1 = DMatrix::<f64>::from_fn(n, n, |_, _| random_f64(&mut rng));
            let a2 = DMatrix::<f64>::from_fn(n, n, |_, _| random_f64(&mut rng));
            let text = write_jointpair(&a1, &a2);
            let (b1, b2) = parse_jointpair(&text).unwrap();
            assert_eq!(a1, b1);
            assert_eq!(a2, b2);
        }

        let e = parse_jointpair("jointpair v1 100000\n").unwrap_err();
        assert!(e.message.contains("maximum"));
        let e = parse_jointpair("jointpair v1 2\n1.0 2.0\n3.0\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_jointpair("jointpair v1 1\n1.0\n2.0\n3.0\n").unwrap_err();
        assert!(e.message.contains("trailing"));
        let e = parse_jointpair("jointpair v1 1\n1.0\n").unwrap_err();
        assert!(e.message.contains("truncated"));
    }

    #[test]
    fn svg_scatter_renders_points_and_boxes() {
        let points = vec![([0.0, 0.0], 0), ([1.0, 0.5], 1), ([0.5, 1.0], 2)];
        let boxes = vec![([0.5, 0.5], [0.25, 0.1])];
        let svg = write_svg_scatter(&points, &boxes);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        // background + one chart box
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains(SVG_PALETTE[0]) && svg.contains(SVG_PALETTE[1]));
        assert_eq!(svg, write_svg_scatter(&points, &boxes));
        // empty input still yields a valid document
        let empty = write_svg_scatter(&[], &[]);
        assert!(empty.contains("</svg>"));
    }

    #[test]
    fn parsers_survive_arbitrary_text() {
        // no panics on junk, multibyte text, or truncations
        let junk = [
            "",
            "\n\n\n",
            "héader vß ∞ ∞\n",
            "formalseries v1 6 4\n1 1 1 1 1 1 1 1 1 1 1 1\n",
            "spectrum v1 eps",
            "model v1\nphi",
            "cover v1\nloop",
            "[ßection]\nkey väl\n",
            "jointpair v1 18446744073709551616\n",
            "manifest v1\nrect 0\n",
            "chartreport v1\nchart ball\n",
        ];
        for text in junk {
            let _ = parse_formalseries(text);
            let _ = parse_spectrum(text, "mem");
            let _ = parse_model(text);
            let _ = parse_cover(text);
            let _ = Config::parse(text);
            let _ = parse_manifest(text);
            let _ = parse_chart_report(text);
            let _ = parse_jointpair(text);
        }
    }

    #[test]
    fn file_wrappers_tag_paths() {
        let e = load_spectrum(Path::new("/nonexistent/cloud.spectrum")).unwrap_err();
        let msg = format!("{e}");
        assert!(msg.contains("/nonexistent/cloud.spectrum"));

        let dir = std::env::temp_dir().join(format!("specmono-io-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.spectrum");
        fs::write(&path, "spectrum v1 eps 1.0e-2 h 1.0e-3\n1.0 oops\n").unwrap();
        let e = load_spectrum(&path).unwrap_err();
        let msg = format!("{e}");
        assert!(msg.contains("broken.spectrum") && msg.contains("byte"));

        let cloud = SpectrumCloud {
            points: vec![C64::new(1.0, 2.0)],
            eps: 1e-2,
            h: 1e-3,
            provenance: Provenance::Synthetic { seed: 0 },
        };
        let path2 = dir.join("ok.spectrum");
        save_spectrum(&path2, &cloud).unwrap();
        let back = load_spectrum(&path2).unwrap();
        assert_eq!(back.points, cloud.points);
        assert!(matches!(back.provenance, Provenance::File { .. }));
        fs::remove_dir_all(&dir).unwrap();
    }
}
