//! Implementations of the subcommands plus the error-to-exit-code mapping.
//!
//! Error classes: `compute` (exit 1) for failures of the mathematics
//! (resonance, no lattice structure, incomplete cover, quadrature...),
//! `config` (exit 2) for configuration and regime violations including
//! malformed config/model/cover files, `io` (exit 3) for unreadable or
//! corrupted data artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use specmono::birkhoff::{BirkhoffError, Frequency, birkhoff_normal_form, twist_symbol};
use specmono::classical::{ClassicalError, action_integral, classical_monodromy, period_lattice};
use specmono::io::{
    self, ChartRecord, ChartReport, HolonomyReport, IoError, LoopRecord, Manifest, ManifestRect,
    OverlapRecord, ParseError, fmt_f64,
};
use specmono::latticemono::{
    IMat2, LatticeError, MicroChart, build_cocycle, conjugacy_equal, fit_micro_chart, holonomy,
    transition_residual,
};
use specmono::quantize::{
    GoodRectangle, JointWindow, QuantizeError, joint_spectrum_normal, micro_chart_forward,
    synth_spectrum,
};
use specmono::symbolcalc::C64;

// ---------------------------------------------------------------------------
// error mapping

#[derive(Debug)]
pub enum CliError {
    Compute(String),
    Config(String),
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Compute(_) => "compute",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Compute(m) | CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<QuantizeError> for CliError {
    fn from(e: QuantizeError) -> Self {
        match e {
            QuantizeError::RegimeViolation { .. } => CliError::Config(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<ClassicalError> for CliError {
    fn from(e: ClassicalError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<BirkhoffError> for CliError {
    fn from(e: BirkhoffError) -> Self {
        CliError::Compute(e.to_string())
    }
}

/// Run-description files (config, model, cover): malformed content is a
/// configuration error, an unreadable file stays an I/O error.
fn config_class<T>(r: Result<T, IoError>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        IoError::Parse { .. } => CliError::Config(e.to_string()),
        other => CliError::Io(other.to_string()),
    })
}

// ---------------------------------------------------------------------------
// flag value types

/// A `j,e` or similar two-float flag value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub [f64; 2]);

/// A `k1,k2` integer mode flag value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode2(pub [i32; 2]);

/// A `cx,cy,radius,nsteps` circular loop flag value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub steps: usize,
}

fn split_csv(s: &str, n: usize, shape: &str) -> Result<Vec<String>, String> {
    let parts: Vec<String> = s.split(',').map(|p| p.trim().to_string()).collect();
    if parts.len() != n {
        return Err(format!("expected {shape}, found `{s}`"));
    }
    Ok(parts)
}

fn csv_f64(part: &str, what: &str) -> Result<f64, String> {
    let v: f64 = part.parse().map_err(|_| format!("expected a number for {what}, found `{part}`"))?;
    if !v.is_finite() {
        return Err(format!("{what} must be finite, found `{part}`"));
    }
    Ok(v)
}

pub fn parse_point(s: &str) -> Result<Pair, String> {
    let p = split_csv(s, 2, "j,e")?;
    Ok(Pair([csv_f64(&p[0], "j")?, csv_f64(&p[1], "e")?]))
}

pub fn parse_mode(s: &str) -> Result<Mode2, String> {
    let p = split_csv(s, 2, "k1,k2")?;
    let k1: i32 = p[0].parse().map_err(|_| format!("expected an integer for k1, found `{}`", p[0]))?;
    let k2: i32 = p[1].parse().map_err(|_| format!("expected an integer for k2, found `{}`", p[1]))?;
    Ok(Mode2([k1, k2]))
}

pub fn parse_loop(s: &str) -> Result<LoopSpec, String> {
    let p = split_csv(s, 4, "cx,cy,radius,nsteps")?;
    let center = [csv_f64(&p[0], "cx")?, csv_f64(&p[1], "cy")?];
    let radius = csv_f64(&p[2], "radius")?;
    if radius <= 0.0 {
        return Err(format!("radius must be positive, found `{}`", p[2]));
    }
    let steps: usize =
        p[3].parse().map_err(|_| format!("expected an integer for nsteps, found `{}`", p[3]))?;
    if steps < 3 {
        return Err(format!("nsteps must be at least 3, found {steps}"));
    }
    Ok(LoopSpec { center, radius, steps })
}

// ---------------------------------------------------------------------------
// shared plumbing

fn resolve(base: &Path, p: &str) -> PathBuf {
    let pb = PathBuf::from(p);
    if pb.is_absolute() { pb } else { base.join(pb) }
}

fn config_base(config_path: &Path) -> PathBuf {
    match config_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// The manifest location: explicit `[paths] manifest`, else
/// `<out_dir>/manifest.txt`.
fn manifest_path(cfg: &io::Config, base: &Path) -> Result<PathBuf, CliError> {
    match cfg.get("paths", "manifest") {
        Some(p) => Ok(resolve(base, p)),
        None => Ok(resolve(base, cfg.require("paths", "out_dir")?).join("manifest.txt")),
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn fmt_imat(m: &IMat2) -> String {
    format!("[[{}, {}], [{}, {}]]", m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1])
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(config_path: &Path) -> Result<(), CliError> {
    let cfg = config_class(io::load_config(config_path))?;
    let base = config_base(config_path);
    let model = config_class(io::load_model(&resolve(&base, cfg.require("run", "model")?)))?;
    let eps = cfg.require_f64("run", "eps")?;
    let h = cfg.require_f64("run", "h")?;
    // jitter is the only randomized ingredient; its seed is mandatory
    let seed = cfg.require_u64("run", "seed")?;
    let jitter = cfg.get_f64("run", "jitter")?.unwrap_or(1.0);
    let cover = config_class(io::load_cover(&resolve(&base, cfg.require("cover", "file")?)))?;
    let per_ball = cfg.get_usize("cover", "rects_per_ball")?.unwrap_or(12);
    let ring = cfg.get_f64("cover", "ring")?.unwrap_or(0.55);
    if per_ball == 0 {
        return Err(CliError::Config("cover.rects_per_ball must be positive".into()));
    }
    if !(ring > 0.0 && ring < 1.0) {
        return Err(CliError::Config(format!("cover.ring must lie in (0, 1), found {ring}")));
    }
    if cover.balls.is_empty() {
        return Err(CliError::Config("cover declares no balls".into()));
    }
    let out_dir = resolve(&base, cfg.require("paths", "out_dir")?);
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    // Rectangle centers sit on a ring inside each ball, in angular order, so
    // consecutive rectangles of a ball stay close (chart gauge propagation
    // in `fit` relies on this). Focus-focus charts are read through the
    // branch anchored at the ball's direction.
    let mut rects: Vec<ManifestRect> = Vec::new();
    for (b, ball) in cover.balls.iter().enumerate() {
        let anchored = model.with_anchor(ball.center[1].atan2(ball.center[0]));
        for j in 0..per_ball {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / per_ball as f64;
            let a = [
                ball.center[0] + ring * ball.radius * phi.cos(),
                ball.center[1] + ring * ball.radius * phi.sin(),
            ];
            let rect = GoodRectangle::new(a, eps, h, model.delta)?;
            let cloud = synth_spectrum(&anchored, &rect, jitter, seed)?;
            let reference = micro_chart_forward(&anchored, &rect)?;
            let file = format!("rect_{:03}.spectrum", rects.len());
            io::save_spectrum(&out_dir.join(&file), &cloud)?;
            rects.push(ManifestRect {
                ball: b,
                center: [rect.center.re, rect.center.im],
                half_width: rect.half_width,
                file,
                diff: reference.f0_diff,
            });
        }
    }

    let manifest = Manifest {
        model_name: io::model_name(&model.map).to_string(),
        eps,
        h,
        delta: model.delta,
        seed,
        rects,
    };
    let manifest_file = out_dir.join("manifest.txt");
    io::save_manifest(&manifest_file, &manifest)?;
    println!(
        "synth: model {} balls {} rectangles {}",
        manifest.model_name,
        cover.balls.len(),
        manifest.rects.len()
    );
    println!("synth: wrote {}", manifest_file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

/// Rounding tolerance for gauge-continuation links between neighboring
/// charts of the same ball. The differential ratio of two nearby fits is an
/// integer gauge times a smooth factor close to the identity, so the
/// tolerance can sit well above the transition tolerance as long as it
/// stays below the 1/2 where entrywise rounding would flip.
const GAUGE_LINK_TOL: f64 = 0.4;

fn mat_mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Integer gauge U with U·to ≈ from, from the rounded differential ratio.
fn gauge_link(from: [[f64; 2]; 2], to: [[f64; 2]; 2]) -> Result<IMat2, String> {
    let det = to[0][0] * to[1][1] - to[0][1] * to[1][0];
    if det.abs() < 1e-300 {
        return Err("gauge link: singular differential".into());
    }
    let inv = [[to[1][1] / det, -to[0][1] / det], [-to[1][0] / det, to[0][0] / det]];
    let q = mat_mul2(from, inv);
    let mut u = [[0i64; 2]; 2];
    let mut residual = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let r = q[i][j].round_ties_even();
            residual = residual.max((q[i][j] - r).abs());
            u[i][j] = r as i64;
        }
    }
    if residual > GAUGE_LINK_TOL {
        return Err(format!("gauge link residual {residual:.4} exceeds {GAUGE_LINK_TOL}"));
    }
    let u = IMat2(u);
    if !u.is_unimodular() {
        return Err(format!("gauge link rounds to det {}, not unimodular", u.det()));
    }
    Ok(u)
}

/// Blind fits of one ball carry arbitrary integer gauges. Stitch them into
/// a single gauge by repeatedly taking the unstitched chart nearest (by
/// rectangle center) to any stitched one and regauging it with the rounded
/// differential ratio. Returns the kept charts in input order plus the
/// centers and reasons of charts whose link failed.
fn continue_gauge(mut charts: Vec<MicroChart>) -> (Vec<MicroChart>, Vec<([f64; 2], String)>) {
    let n = charts.len();
    let mut dropped = Vec::new();
    if n == 0 {
        return (charts, dropped);
    }
    let centers: Vec<[f64; 2]> = charts.iter().map(|c| c.rect.u_center()).collect();
    // 0 = pending, 1 = stitched, 2 = dropped
    let mut state = vec![0u8; n];
    state[0] = 1;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if state[i] != 1 {
                continue;
            }
            for j in 0..n {
                if state[j] != 0 {
                    continue;
                }
                let d = [centers[j][0] - centers[i][0], centers[j][1] - centers[i][1]];
                let d2 = d[0] * d[0] + d[1] * d[1];
                if best.is_none_or(|(_, _, b)| d2 < b) {
                    best = Some((i, j, d2));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        match gauge_link(charts[i].f0_diff, charts[j].f0_diff) {
            Ok(u) => {
                let m = [
                    [u.0[0][0] as f64, u.0[0][1] as f64],
                    [u.0[1][0] as f64, u.0[1][1] as f64],
                ];
                charts[j].f0_diff = mat_mul2(m, charts[j].f0_diff);
                let b = charts[j].f0_offset;
                charts[j].f0_offset =
                    [m[0][0] * b[0] + m[0][1] * b[1], m[1][0] * b[0] + m[1][1] * b[1]];
                state[j] = 1;
            }
            Err(reason) => {
                dropped.push(([charts[j].rect.center.re, charts[j].rect.center.im], reason));
                state[j] = 2;
            }
        }
    }
    let kept = charts
        .into_iter()
        .zip(&state)
        .filter(|(_, s)| **s == 1)
        .map(|(c, _)| c)
        .collect();
    (kept, dropped)
}

pub fn cmd_fit(config_path: &Path) -> Result<(), CliError> {
    let cfg = config_class(io::load_config(config_path))?;
    let base = config_base(config_path);
    let cover = config_class(io::load_cover(&resolve(&base, cfg.require("cover", "file")?)))?;
    let man_path = manifest_path(&cfg, &base)?;
    let manifest = io::load_manifest(&man_path)?;
    let man_dir = parent_dir(&man_path);
    let charts_path = resolve(&base, cfg.require("paths", "charts")?);

    let n_balls = cover.balls.len();
    let mut blind: Vec<Vec<MicroChart>> = vec![Vec::new(); n_balls];
    let mut failures: Vec<Vec<([f64; 2], String)>> = vec![Vec::new(); n_balls];
    for r in &manifest.rects {
        let cloud = io::load_spectrum(&man_dir.join(&r.file))?;
        let rect = manifest.rectangle(r);
        let u = rect.u_center();
        for (b, ball) in cover.balls.iter().enumerate() {
            if !ball.contains(u) {
                continue;
            }
            match fit_micro_chart(&cloud, &rect, None) {
                Ok(chart) => blind[b].push(chart),
                Err(e) => {
                    failures[b].push(([rect.center.re, rect.center.im], e.to_string()));
                }
            }
        }
    }

    let mut accepted = vec![0usize; n_balls];
    let mut rejected = vec![0usize; n_balls];
    let mut records = Vec::new();
    for b in 0..n_balls {
        let (kept, dropped) = continue_gauge(std::mem::take(&mut blind[b]));
        accepted[b] = kept.len();
        for chart in kept {
            records.push(ChartRecord::Accepted { ball: b, chart });
        }
        for (center, reason) in dropped.into_iter().chain(std::mem::take(&mut failures[b])) {
            rejected[b] += 1;
            records.push(ChartRecord::Rejected { ball: b, center, reason });
        }
    }

    io::save_chart_report(&charts_path, &ChartReport { records })?;
    for b in 0..n_balls {
        println!("fit: ball {b}: {} accepted, {} rejected", accepted[b], rejected[b]);
    }
    println!("fit: wrote {}", charts_path.display());
    if let Some(b) = (0..n_balls).find(|&b| accepted[b] == 0) {
        return Err(CliError::Compute(format!("ball {b} has no accepted charts")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// monodromy

pub fn cmd_monodromy(config_path: &Path) -> Result<(), CliError> {
    let cfg = config_class(io::load_config(config_path))?;
    let base = config_base(config_path);
    let cover = config_class(io::load_cover(&resolve(&base, cfg.require("cover", "file")?)))?;
    let charts_path = resolve(&base, cfg.require("paths", "charts")?);
    let chart_report = io::load_chart_report(&charts_path)?;
    let report_path = resolve(&base, cfg.require("paths", "report")?);

    let expected: Option<IMat2> = match cfg.get("monodromy", "expected") {
        None => None,
        Some(v) => {
            let parts: Vec<&str> = v.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(CliError::Config(format!(
                    "monodromy.expected must be four integers `m00 m01 m10 m11`, found `{v}`"
                )));
            }
            let mut e = [0i64; 4];
            for (slot, part) in e.iter_mut().zip(&parts) {
                *slot = part.parse().map_err(|_| {
                    CliError::Config(format!("monodromy.expected: `{part}` is not an integer"))
                })?;
            }
            Some(IMat2::new(e[0], e[1], e[2], e[3]))
        }
    };

    // Charts fitted on the same rectangle from different balls witness the
    // transition on that overlap. Rectangles are identified by the exact
    // bytes of their center, which survive the report round-trip.
    let mut by_rect: BTreeMap<(u64, u64), Vec<(usize, MicroChart)>> = BTreeMap::new();
    for rec in &chart_report.records {
        if let ChartRecord::Accepted { ball, chart } = rec {
            by_rect
                .entry((chart.rect.center.re.to_bits(), chart.rect.center.im.to_bits()))
                .or_default()
                .push((*ball, chart.clone()));
        }
    }
    let mut overlap_charts: BTreeMap<(usize, usize), Vec<(MicroChart, MicroChart)>> =
        BTreeMap::new();
    for entries in by_rect.values() {
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                let (ba, ca) = &entries[i];
                let (bb, cb) = &entries[j];
                if ba == bb {
                    continue;
                }
                let (key, pair) = if ba < bb {
                    ((*ba, *bb), (ca.clone(), cb.clone()))
                } else {
                    ((*bb, *ba), (cb.clone(), ca.clone()))
                };
                overlap_charts.entry(key).or_default().push(pair);
            }
        }
    }

    let cocycle = build_cocycle(cover.balls.len(), &overlap_charts)?;
    let mut overlaps = Vec::new();
    for (&(a, b), pairs) in &overlap_charts {
        let matrix = cocycle.get(a, b).expect("built from this overlap set");
        let max_residual =
            pairs.iter().map(|(x, y)| transition_residual(x, y)).fold(0.0, f64::max);
        println!(
            "monodromy: overlap ({a}, {b}): {} pairs, matrix {}, residual {:.3e}",
            pairs.len(),
            fmt_imat(&matrix),
            max_residual
        );
        overlaps.push(OverlapRecord { pair: [a, b], matrix, pairs: pairs.len(), max_residual });
    }

    let mut loops = Vec::new();
    let mut mismatched = false;
    for lp in &cover.loops {
        let class = holonomy(&cocycle, lp)?;
        let verdict = expected.map(|want| {
            let ok = conjugacy_equal(&class.representative, &want).is_conjugate();
            (want, ok)
        });
        let loop_str: Vec<String> = lp.iter().map(|b| b.to_string()).collect();
        print!(
            "monodromy: loop [{}]: matrix {} trace {} det {}",
            loop_str.join(" "),
            fmt_imat(&class.representative),
            class.trace,
            class.det
        );
        match verdict {
            Some((want, ok)) => {
                println!(", expected {} -> {}", fmt_imat(&want), if ok { "conjugate" } else { "NOT conjugate" });
                mismatched |= !ok;
            }
            None => println!(),
        }
        loops.push(LoopRecord { balls: lp.clone(), class, expected: verdict });
    }

    io::save_text(&report_path, &io::write_holonomy_report(&HolonomyReport { overlaps, loops }))?;
    println!("monodromy: wrote {}", report_path.display());

    if let Some(svg_rel) = cfg.get("paths", "svg") {
        let svg_path = resolve(&base, svg_rel);
        let man_path = manifest_path(&cfg, &base)?;
        let manifest = io::load_manifest(&man_path)?;
        let man_dir = parent_dir(&man_path);
        let mut points = Vec::new();
        for r in &manifest.rects {
            let cloud = io::load_spectrum(&man_dir.join(&r.file))?;
            for p in &cloud.points {
                points.push(([p.re, p.im / cloud.eps], r.ball));
            }
        }
        let mut boxes = Vec::new();
        for rec in &chart_report.records {
            if let ChartRecord::Accepted { chart, .. } = rec {
                let rc = &chart.rect;
                boxes.push((
                    [rc.center.re, rc.center.im / rc.eps],
                    [rc.half_width[0], rc.half_width[1] / rc.eps],
                ));
            }
        }
        io::save_text(&svg_path, &io::write_svg_scatter(&points, &boxes))?;
        println!("monodromy: wrote {}", svg_path.display());
    }

    if mismatched {
        return Err(CliError::Compute(
            "holonomy does not lie in the expected conjugacy class for at least one loop".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bnf

pub struct BnfArgs {
    pub order: u32,
    pub alpha: f64,
    pub d: f64,
    pub qmax: u64,
    pub a1: f64,
    pub a2: f64,
    pub gamma: f64,
    pub mode: Mode2,
    pub coeff: f64,
    pub nmax: u32,
    pub kmax: i32,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

pub fn cmd_bnf(args: &BnfArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha.is_finite()) {
        return Err(CliError::Config(format!("--alpha must be positive, found {}", args.alpha)));
    }
    if !(args.d > 0.0 && args.d.is_finite()) {
        return Err(CliError::Config(format!("--d must be positive, found {}", args.d)));
    }
    if args.qmax == 0 {
        return Err(CliError::Config("--qmax must be positive".into()));
    }
    if !(args.a1.is_finite() && args.a2.is_finite()) {
        return Err(CliError::Config("--a1/--a2 must be finite".into()));
    }

    let series = match &args.input {
        Some(path) => io::load_formalseries(path)?,
        None => twist_symbol(
            [args.a1, args.a2],
            args.gamma,
            args.mode.0,
            C64::new(args.coeff, 0.0),
            args.nmax,
            args.kmax,
        )?,
    };
    let freq = Frequency { a: [args.a1, args.a2], alpha: args.alpha, d: args.d, q_max: args.qmax };
    let result = birkhoff_normal_form(&series, &freq, args.order)?;

    println!("bnf v1");
    println!("order {}", result.normalized_order);
    println!("omega {}", fmt_f64(freq.omega()));
    println!("alpha {} d {} qmax {}", fmt_f64(args.alpha), fmt_f64(args.d), args.qmax);
    println!("residual {}", fmt_f64(result.residual_norm));
    println!("generator_terms {}", result.generator.num_terms());
    println!("normal_form_terms {}", result.normal_form.num_terms());
    if let Some(out) = &args.output {
        io::save_formalseries(out, &result.normal_form)?;
        println!("bnf: wrote {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// normal-joint

pub fn cmd_normal_joint(input: &Path) -> Result<(), CliError> {
    let (a1, a2) = io::load_jointpair(input)?;
    let c1 = a1.map(|x| C64::new(x, 0.0));
    let c2 = a2.map(|x| C64::new(x, 0.0));
    let points = joint_spectrum_normal(&c1, &c2, &JointWindow::ALL)?;
    println!("jointspectrum v1");
    println!("count {}", points.len());
    for p in &points {
        println!(
            "point {} {} multiplicity {}",
            fmt_f64(p.value[0]),
            fmt_f64(p.value[1]),
            p.multiplicity
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// classical

pub fn cmd_classical(point: Option<Pair>, loop_spec: Option<LoopSpec>) -> Result<(), CliError> {
    if point.is_none() && loop_spec.is_none() {
        return Err(CliError::Config(
            "classical requires --point j,e and/or --loop cx,cy,radius,nsteps".into(),
        ));
    }
    println!("classical v1");
    if let Some(Pair([j, e])) = point {
        let lattice = period_lattice(j, e)?;
        let action = action_integral(j, e)?;
        println!("point j {} e {}", fmt_f64(j), fmt_f64(e));
        println!("T {}", fmt_f64(lattice.t()));
        println!("Theta {}", fmt_f64(lattice.theta()));
        println!("I {}", fmt_f64(action));
        println!("quadrature_error {}", fmt_f64(lattice.quadrature_error));
    }
    if let Some(ls) = loop_spec {
        // half-step phase offset keeps axis-crossing samples off j = 0
        let pts: Vec<[f64; 2]> = (0..ls.steps)
            .map(|k| {
                let phi = std::f64::consts::TAU * (k as f64 + 0.5) / ls.steps as f64;
                [ls.center[0] + ls.radius * phi.cos(), ls.center[1] + ls.radius * phi.sin()]
            })
            .collect();
        let m = classical_monodromy(&pts)?;
        println!(
            "loop center {} {} radius {} steps {}",
            fmt_f64(ls.center[0]),
            fmt_f64(ls.center[1]),
            fmt_f64(ls.radius),
            ls.steps
        );
        println!("winding {}", m.winding);
        println!("theta_change {}", fmt_f64(m.theta_change));
        println!(
            "monodromy {} {} {} {}",
            m.matrix.0[0][0], m.matrix.0[0][1], m.matrix.0[1][0], m.matrix.0[1][1]
        );
    }
    Ok(())
}
