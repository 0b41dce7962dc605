//! Graph-matrix shapes, their realization from sampled data, trace-moment
//! Monte Carlo, and the block-value function B_q computed by enumerating
//! step-labelings.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{self, EdgeFactorTable, EdgeScheme, HermiteIndex};
use crate::linalg;
use crate::sampling::{derive_seed, sample_goe, sample_vectors, GoeMatrix, SampleSet};

/// Largest matrix dimension accepted by the Monte Carlo routines.
pub const MC_MAX_DIM: usize = 2000;
/// Largest edge count handled by the labeling enumerator.
pub const MAX_LABELED_EDGES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexType {
    Square,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StepLabel {
    F,
    R,
    S,
    H,
}

impl StepLabel {
    pub const ALL: [StepLabel; 4] = [StepLabel::F, StepLabel::R, StepLabel::S, StepLabel::H];

    fn is_new(self) -> bool {
        matches!(self, StepLabel::F | StepLabel::S)
    }
}

impl fmt::Display for StepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            StepLabel::F => 'F',
            StepLabel::R => 'R',
            StepLabel::S => 'S',
            StepLabel::H => 'H',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ShapeKind {
    Goe,
    MAlpha,
    MBeta,
    MD1,
    MD2,
    MD3,
    SumVV,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 7] = [
        ShapeKind::Goe,
        ShapeKind::MAlpha,
        ShapeKind::MBeta,
        ShapeKind::MD1,
        ShapeKind::MD2,
        ShapeKind::MD3,
        ShapeKind::SumVV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Goe => "goe",
            ShapeKind::MAlpha => "malpha",
            ShapeKind::MBeta => "mbeta",
            ShapeKind::MD1 => "md1",
            ShapeKind::MD2 => "md2",
            ShapeKind::MD3 => "md3",
            ShapeKind::SumVV => "sumvv",
        }
    }

    /// Case-insensitive lookup; underscores and dashes are ignored.
    pub fn parse(name: &str) -> Result<ShapeKind> {
        let key: String = name
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(|c| c.to_lowercase())
            .collect();
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownShape {
                name: name.to_string(),
                catalog: ShapeKind::ALL.map(|k| k.name()).join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    pub name: &'static str,
    pub kind: VertexType,
}

/// Edge oriented along the traversal from U to V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub index: HermiteIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub vertices: Vec<Vertex>,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    /// In traversal order.
    pub edges: Vec<Edge>,
}

fn sq(name: &'static str) -> Vertex {
    Vertex { name, kind: VertexType::Square }
}

fn ci(name: &'static str) -> Vertex {
    Vertex { name, kind: VertexType::Circle }
}

fn e(from: usize, to: usize, index: HermiteIndex) -> Edge {
    Edge { from, to, index }
}

impl Shape {
    pub fn get(kind: ShapeKind) -> Shape {
        let (vertices, u, v, edges) = match kind {
            ShapeKind::Goe => (vec![ci("a"), ci("b")], vec![0], vec![1], vec![e(0, 1, 1)]),
            ShapeKind::MAlpha => (
                vec![sq("i"), ci("a"), ci("b"), sq("j")],
                vec![0],
                vec![3],
                vec![e(0, 1, 1), e(1, 3, 1), e(0, 2, 1), e(2, 3, 1)],
            ),
            ShapeKind::MBeta => (
                vec![sq("i"), ci("a"), sq("j")],
                vec![0],
                vec![2],
                vec![e(0, 1, 2), e(1, 2, 2)],
            ),
            ShapeKind::MD1 => (
                vec![sq("i"), ci("a"), ci("b")],
                vec![0],
                vec![0],
                vec![e(0, 1, 2), e(0, 2, 2)],
            ),
            ShapeKind::MD2 => (vec![sq("i"), ci("a")], vec![0], vec![0], vec![e(0, 1, 4)]),
            ShapeKind::MD3 => (vec![sq("i"), ci("a")], vec![0], vec![0], vec![e(0, 1, 2)]),
            ShapeKind::SumVV => (
                vec![ci("a"), sq("i"), ci("b")],
                vec![0],
                vec![2],
                vec![e(0, 1, 1), e(1, 2, 1)],
            ),
        };
        Shape { kind, vertices, u, v, edges }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn is_diagonal(&self) -> bool {
        self.u == self.v
    }

    /// Vertex type of the row/column index.
    pub fn boundary_type(&self) -> VertexType {
        self.vertices[self.u[0]].kind
    }

    /// Number of rows (= columns) of the realized matrix.
    pub fn dimension(&self, d: usize, m: usize) -> usize {
        match self.boundary_type() {
            VertexType::Square => m,
            VertexType::Circle => d,
        }
    }

    /// h_1-only or h_2-only shapes use the pure edge table.
    pub fn edge_scheme(&self) -> EdgeScheme {
        let first = self.edges[0].index;
        if (first == 1 || first == 2) && self.edges.iter().all(|e| e.index == first) {
            EdgeScheme::Pure
        } else {
            EdgeScheme::Mixed
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.u.len() != 1 || self.v.len() != 1 {
            return Err(Error::InvalidArgument("catalog shapes have |U| = |V| = 1".into()));
        }
        if self.edges.iter().any(|e| e.from >= n || e.to >= n || e.index > 4) {
            return Err(Error::InvalidArgument(format!("malformed shape {}", self.name())));
        }
        Ok(())
    }
}

/// All catalog shapes.
pub fn catalog() -> Vec<Shape> {
    ShapeKind::ALL.into_iter().map(Shape::get).collect()
}

/// 2 * (largest vertex count in the catalog).
pub fn default_dv() -> usize {
    2 * catalog().iter().map(|s| s.vertices.len()).max().unwrap_or(1)
}

/// Data a shape is realized from.
#[derive(Debug, Clone, Copy)]
pub enum RealizeInput<'a> {
    Vectors(&'a SampleSet),
    Goe(&'a GoeMatrix),
}

fn need_vectors<'a>(shape: &Shape, input: RealizeInput<'a>) -> Result<&'a SampleSet> {
    match input {
        RealizeInput::Vectors(s) => Ok(s),
        RealizeInput::Goe(_) => Err(Error::InvalidArgument(format!(
            "shape {} is realized from Gaussian vectors, not a GOE matrix",
            shape.name()
        ))),
    }
}

fn middle_counts(shape: &Shape) -> (usize, usize) {
    let mut squares = 0;
    let mut circles = 0;
    for (i, v) in shape.vertices.iter().enumerate() {
        if shape.u.contains(&i) || shape.v.contains(&i) {
            continue;
        }
        match v.kind {
            VertexType::Square => squares += 1,
            VertexType::Circle => circles += 1,
        }
    }
    (squares, circles)
}

fn check_labels(shape: &Shape, d: usize, m: usize) -> Result<()> {
    let (squares, circles) = middle_counts(shape);
    if circles > d || squares > m {
        return Err(Error::DimensionTooSmall(format!(
            "shape {} needs {circles} distinct circle labels (d={d}) and {squares} square labels (m={m})",
            shape.name()
        )));
    }
    Ok(())
}

fn offdiag(mut x: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..x.nrows() {
        x[(i, i)] = 0.0;
    }
    x
}

/// Materializes M_tau, summing over labelings injective per vertex type.
pub fn realize(shape: &Shape, input: RealizeInput<'_>) -> Result<DMatrix<f64>> {
    shape.check()?;
    if shape.kind == ShapeKind::Goe {
        return match input {
            RealizeInput::Goe(g) => Ok(offdiag(g.entries.clone())),
            RealizeInput::Vectors(_) => Err(Error::InvalidArgument(
                "the goe shape is realized from a GOE matrix".into(),
            )),
        };
    }
    let s = need_vectors(shape, input)?;
    check_labels(shape, s.d, s.m)?;
    let v = &s.vectors;
    let inv_d = 1.0 / s.d as f64;
    let diag_of = |f: &dyn Fn(usize) -> f64| DMatrix::from_diagonal(&DVector::from_fn(s.m, |i, _| f(i)));
    Ok(match shape.kind {
        ShapeKind::MAlpha => {
            let g = v * v.transpose();
            let sqm = v.map(|x| x * x);
            let mut q = &sqm * sqm.transpose();
            q.zip_apply(&g, |qij, gij| *qij = gij * gij - *qij);
            offdiag(q)
        }
        ShapeKind::MBeta => {
            let h2 = v.map(|x| x * x - inv_d);
            offdiag(&h2 * h2.transpose())
        }
        ShapeKind::MD1 => diag_of(&|i| {
            let (mut s1, mut s2) = (0.0, 0.0);
            for x in v.row(i).iter() {
                let h = hermite::scaled(2, *x, inv_d);
                s1 += h;
                s2 += h * h;
            }
            s1 * s1 - s2
        }),
        ShapeKind::MD2 => diag_of(&|i| v.row(i).iter().map(|x| hermite::scaled(4, *x, inv_d)).sum()),
        ShapeKind::MD3 => diag_of(&|i| v.row(i).iter().map(|x| hermite::scaled(2, *x, inv_d)).sum()),
        ShapeKind::SumVV => offdiag(v.transpose() * v),
        ShapeKind::Goe => unreachable!(),
    })
}

/// Realization by explicit enumeration of every injective labeling; the
/// reference the fast paths are tested against. Exponential in the shape size.
pub fn realize_by_enumeration(shape: &Shape, input: RealizeInput<'_>) -> Result<DMatrix<f64>> {
    shape.check()?;
    let (d, m) = match input {
        RealizeInput::Vectors(s) => (s.d, s.m),
        RealizeInput::Goe(g) => (g.n, 0),
    };
    check_labels(shape, d, m)?;
    let dim = shape.dimension(d, m);
    let mut out = DMatrix::zeros(dim, dim);
    let nv = shape.vertices.len();
    let mut label = vec![usize::MAX; nv];
    let inv_d = 1.0 / d.max(1) as f64;

    let edge_value = |e: &Edge, label: &[usize]| -> Result<f64> {
        let (x, y) = (e.from, e.to);
        let (kx, ky) = (shape.vertices[x].kind, shape.vertices[y].kind);
        match (input, kx, ky) {
            (RealizeInput::Goe(g), VertexType::Circle, VertexType::Circle) if e.index == 1 => {
                Ok(g.entries[(label[x], label[y])])
            }
            (RealizeInput::Vectors(s), VertexType::Square, VertexType::Circle) => {
                Ok(hermite::scaled(e.index, s.vectors[(label[x], label[y])], inv_d))
            }
            (RealizeInput::Vectors(s), VertexType::Circle, VertexType::Square) => {
                Ok(hermite::scaled(e.index, s.vectors[(label[y], label[x])], inv_d))
            }
            _ => Err(Error::InvalidArgument(format!(
                "shape {} does not match the supplied input",
                shape.name()
            ))),
        }
    };

    fn assign(
        k: usize,
        shape: &Shape,
        d: usize,
        m: usize,
        label: &mut Vec<usize>,
        out: &mut DMatrix<f64>,
        edge_value: &dyn Fn(&Edge, &[usize]) -> Result<f64>,
    ) -> Result<()> {
        if k == shape.vertices.len() {
            let mut p = 1.0;
            for e in &shape.edges {
                p *= edge_value(e, label)?;
            }
            out[(label[shape.u[0]], label[shape.v[0]])] += p;
            return Ok(());
        }
        let kind = shape.vertices[k].kind;
        let range = match kind {
            VertexType::Square => m,
            VertexType::Circle => d,
        };
        for l in 0..range {
            let clash = (0..k).any(|j| shape.vertices[j].kind == kind && label[j] == l);
            if clash {
                continue;
            }
            label[k] = l;
            assign(k + 1, shape, d, m, label, out, edge_value)?;
        }
        label[k] = usize::MAX;
        Ok(())
    }
    assign(0, shape, d, m, &mut label, &mut out, &edge_value)?;
    Ok(out)
}

/// Fresh input for one Monte Carlo trial of `shape`.
pub fn realize_random(shape: &Shape, d: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if shape.kind == ShapeKind::Goe {
        let g = sample_goe(seed, d, 1.0 / d as f64)?;
        realize(shape, RealizeInput::Goe(&g))
    } else {
        let s = sample_vectors(seed, d, m)?;
        realize(shape, RealizeInput::Vectors(&s))
    }
}

/// Eigenvalues of a realized (symmetric) matrix; diagonal shapes skip the solver.
fn realized_spectrum(shape: &Shape, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if shape.is_diagonal() {
        Ok(x.diagonal().iter().copied().collect())
    } else {
        linalg::sym_eigenvalues(x)
    }
}

fn guard(shape: &Shape, d: usize, m: usize, q: usize, trials: usize) -> Result<usize> {
    if q == 0 || trials == 0 {
        return Err(Error::InvalidArgument("q and trials must be >= 1".into()));
    }
    if d == 0 || (shape.kind != ShapeKind::Goe && m == 0) {
        return Err(Error::InvalidArgument("d and m must be >= 1".into()));
    }
    let dim = shape.dimension(d, m);
    if dim > MC_MAX_DIM {
        return Err(Error::SizeLimit(format!(
            "matrix dimension {dim} exceeds the Monte Carlo guard {MC_MAX_DIM}"
        )));
    }
    Ok(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-trial (trace for each q, spectral norm); trials run in parallel and
/// come back in index order.
fn trial_moments(shape: &Shape, d: usize, m: usize, qs: &[usize], trials: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = realize_random(shape, d, m, derive_seed(seed, t as u64))?;
            let ev = realized_spectrum(shape, &x)?;
            let traces = qs
                .iter()
                .map(|&q| ev.iter().map(|l| l.abs().powi(2 * q as i32)).sum())
                .collect();
            let norm = ev.iter().fold(0.0f64, |a, l| a.max(l.abs()));
            Ok((traces, norm))
        })
        .collect()
}

/// Monte Carlo estimate of E tr((M M^T)^q).
pub fn trace_moment_mc(shape: &Shape, d: usize, m: usize, q: usize, trials: usize, seed: u64) -> Result<TraceEstimate> {
    guard(shape, d, m, q, trials)?;
    let rows = trial_moments(shape, d, m, &[q], trials, seed)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0[0]).collect();
    let (mean, stderr) = mean_stderr(&xs);
    Ok(TraceEstimate { mean, stderr, trials })
}

/// One labeling of the block with its factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelingRow {
    pub labels: String,
    pub first: Vec<&'static str>,
    pub last: Vec<&'static str>,
    pub vertex_factor: f64,
    pub pur_circle: u32,
    pub pur_square: u32,
    pub return_multiplier: f64,
    pub pur_factor: f64,
    pub edge_factor: f64,
    pub product: f64,
}

impl LabelingRow {
    /// Only F and R labels.
    pub fn is_dominant(&self) -> bool {
        self.labels.chars().all(|c| c == 'F' || c == 'R')
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockValueBreakdown {
    pub shape: &'static str,
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub dv: usize,
    pub edge_scheme: EdgeScheme,
    pub candidates: usize,
    pub rows: Vec<LabelingRow>,
    /// Sum over labelings using only F and R.
    pub dominant: f64,
    pub total: f64,
}

/// Derived per-vertex flags of a labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLabeling {
    pub labels: Vec<StepLabel>,
    pub can_be_first: Vec<bool>,
    pub can_be_last: Vec<bool>,
    pub pur_circle: u32,
    pub pur_square: u32,
    pub square_return: bool,
}

impl StepLabeling {
    /// Applies the localized deduction rules; `None` when the labeling cannot
    /// describe any walk (an F edge into a vertex seen before, or an R/H edge
    /// touching a vertex created in this block).
    pub fn deduce(shape: &Shape, labels: &[StepLabel]) -> Option<StepLabeling> {
        let n = shape.vertices.len();
        let in_u = |v: usize| shape.u.contains(&v);
        let in_v = |v: usize| shape.v.contains(&v);
        let mut fresh = vec![false; n];
        let mut old_target = vec![false; n];
        for (e, l) in shape.edges.iter().zip(labels) {
            if *l == StepLabel::F {
                fresh[e.to] = true;
            } else {
                old_target[e.to] = true;
            }
        }
        for v in 0..n {
            if fresh[v] && (in_u(v) || old_target[v]) {
                return None;
            }
        }
        for (e, l) in shape.edges.iter().zip(labels) {
            if !l.is_new() && (fresh[e.from] || fresh[e.to]) {
                return None;
            }
        }
        let mut can_be_first = vec![false; n];
        let mut can_be_last = vec![false; n];
        for v in 0..n {
            can_be_first[v] = !in_u(v) && !old_target[v];
            let busy = shape
                .edges
                .iter()
                .zip(labels)
                .any(|(e, l)| (e.from == v || e.to == v) && *l != StepLabel::R);
            can_be_last[v] = !in_v(v) && !busy;
        }
        let (mut pur_circle, mut pur_square) = (0, 0);
        let mut r_out = vec![0u32; n];
        let mut square_return = false;
        for (e, l) in shape.edges.iter().zip(labels) {
            let target = shape.vertices[e.to].kind;
            match (l, target) {
                (StepLabel::S, VertexType::Circle) => pur_circle += 2,
                (StepLabel::H, VertexType::Circle) => pur_circle += 1,
                (StepLabel::S | StepLabel::H, VertexType::Square) => pur_square += 2,
                (StepLabel::R, VertexType::Square) => square_return = true,
                _ => {}
            }
            if *l == StepLabel::R {
                r_out[e.from] += 1;
            }
        }
        for v in 0..n {
            if shape.vertices[v].kind == VertexType::Square && r_out[v] >= 2 {
                square_return = true;
            }
        }
        Some(StepLabeling {
            labels: labels.to_vec(),
            can_be_first,
            can_be_last,
            pur_circle,
            pur_square,
            square_return,
        })
    }
}

/// All 4^k labelings of k edges, in lexicographic F < R < S < H order.
pub fn all_labelings(k: usize) -> Vec<Vec<StepLabel>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                StepLabel::ALL.into_iter().map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

/// B_q(tau) as the sum over admissible step-labelings of
/// vertex factor * pur factor * edge factor.
pub fn block_value(shape: &Shape, d: usize, m: usize, q: usize, dv: usize) -> Result<BlockValueBreakdown> {
    shape.check()?;
    if shape.edges.len() > MAX_LABELED_EDGES {
        return Err(Error::SizeLimit(format!("shape has more than {MAX_LABELED_EDGES} edges")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let table: EdgeFactorTable = hermite::edge_factor_table(d, q, dv)?;
    let scheme = shape.edge_scheme();
    let weight = |v: usize| match shape.vertices[v].kind {
        VertexType::Square => m as f64,
        VertexType::Circle => d as f64,
    };
    let pur_base = (2 * q * dv) as f64;
    let candidates = all_labelings(shape.edges.len());
    let n_candidates = candidates.len();
    let mut rows = Vec::new();
    for labels in candidates {
        let Some(sl) = StepLabeling::deduce(shape, &labels) else {
            continue;
        };
        let mut vertex_factor = 1.0;
        let mut first = Vec::new();
        let mut last = Vec::new();
        for v in 0..shape.vertices.len() {
            if sl.can_be_first[v] {
                vertex_factor *= weight(v).sqrt();
                first.push(shape.vertices[v].name);
            }
            if sl.can_be_last[v] {
                vertex_factor *= weight(v).sqrt();
                last.push(shape.vertices[v].name);
            }
        }
        let return_multiplier = if sl.square_return { 2.0 } else { 1.0 };
        let pur_factor = pur_base.powi((sl.pur_circle + sl.pur_square) as i32) * return_multiplier;
        let edge_factor: f64 = shape
            .edges
            .iter()
            .zip(&labels)
            .map(|(e, l)| table.edge(scheme, e.index, *l))
            .product();
        let product = vertex_factor * pur_factor * edge_factor;
        rows.push(LabelingRow {
            labels: labels.iter().map(|l| l.to_string()).collect(),
            first,
            last,
            vertex_factor,
            pur_circle: sl.pur_circle,
            pur_square: sl.pur_square,
            return_multiplier,
            pur_factor,
            edge_factor,
            product,
        });
    }
    let total = rows.iter().map(|r| r.product).sum();
    let dominant = rows.iter().filter(|r| r.is_dominant()).map(|r| r.product).sum();
    Ok(BlockValueBreakdown {
        shape: shape.name(),
        d,
        m,
        q,
        dv,
        edge_scheme: scheme,
        candidates: n_candidates,
        rows,
        dominant,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundCheck {
    pub check: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockBoundReport {
    pub shape: &'static str,
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub dv: usize,
    pub trials: usize,
    pub seed: u64,
    pub block_value: f64,
    pub dimension: usize,
    pub trace: TraceEstimate,
    pub max_norm: f64,
    pub checks: Vec<BoundCheck>,
}

impl BlockBoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Checks (a) E tr((MM^T)^q) <= dim * B^{2q} within 3 standard errors and
/// (b) every realized norm <= 1.2 B, for each q in `qs` on shared trials.
pub fn verify_block_bound_multi(
    shape: &Shape,
    d: usize,
    m: usize,
    qs: &[usize],
    trials: usize,
    seed: u64,
    dv: usize,
) -> Result<Vec<BlockBoundReport>> {
    let mut dim = 0;
    for &q in qs {
        dim = guard(shape, d, m, q, trials)?;
    }
    let moments = trial_moments(shape, d, m, qs, trials, seed)?;
    let max_norm = moments.iter().fold(0.0f64, |a, r| a.max(r.1));
    qs.iter()
        .enumerate()
        .map(|(k, &q)| {
            let bv = block_value(shape, d, m, q, dv)?.total;
            let xs: Vec<f64> = moments.iter().map(|r| r.0[k]).collect();
            let (mean, stderr) = mean_stderr(&xs);
            let lower = mean - 3.0 * stderr;
            // Compare in logs: B^{2q} may leave the floating range.
            let log_bound = (dim as f64).ln() + 2.0 * q as f64 * bv.ln();
            let trace_pass = lower <= 0.0 || lower.ln() <= log_bound;
            let checks = vec![
                BoundCheck { check: "trace", measured: lower, bound: log_bound.exp(), pass: trace_pass },
                BoundCheck { check: "norm", measured: max_norm, bound: 1.2 * bv, pass: max_norm <= 1.2 * bv },
            ];
            Ok(BlockBoundReport {
                shape: shape.name(),
                d,
                m,
                q,
                dv,
                trials,
                seed,
                block_value: bv,
                dimension: dim,
                trace: TraceEstimate { mean, stderr, trials },
                max_norm,
                checks,
            })
        })
        .collect()
}

pub fn verify_block_bound(shape: &Shape, d: usize, m: usize, q: usize, trials: usize, seed: u64) -> Result<BlockBoundReport> {
    Ok(verify_block_bound_multi(shape, d, m, &[q], trials, seed, default_dv())?.remove(0))
}
