use serde::Serialize;

use super::{ball_orthant_dykstra, entity_domain_violation, project_entity_domain, project_sandwich_point};
use crate::error::{Error, Result};
use crate::kg::Rule;
use crate::scoring::{dot, EntityDomain, ModelKind, ModelParams, ModelSpec};

/// Slice of a relation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    /// Subject half `r₁`.
    First,
    /// Object half `r₂`.
    Second,
    /// All learnable coordinates.
    Whole,
}

/// A named parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Rel { rel: usize, part: Part },
    Ent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Relation,
    Entity,
}

impl Block {
    pub fn kind(self) -> BlockKind {
        match self {
            Block::Rel { .. } => BlockKind::Relation,
            Block::Ent(_) => BlockKind::Entity,
        }
    }
}

/// `Σ cₖ xₖ` over blocks of equal length.
pub type LinExpr = Vec<(f64, Block)>;

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `lhs ≤ rhs` coordinatewise.
    ElemLe { lhs: LinExpr, rhs: LinExpr },
    /// `low ≤ mid ≤ -low` coordinatewise.
    Sandwich { low: LinExpr, mid: LinExpr },
    /// `lhs = rhs` coordinatewise.
    AffineEq { lhs: LinExpr, rhs: LinExpr },
    /// `Σ c <a, b> ≥ 0`.
    InnerProdGe(Vec<(f64, Block, Block)>),
    /// Every entity lies in `ℝ₊ ∩ B(a, ‖a‖)` where `a` is the expression.
    BallOrthant(LinExpr),
    /// `matrix(r) ≤ matrix(r2)ᵀ` elementwise.
    TransposeLe { r: usize, r2: usize },
    /// `matrix(r)` is symmetric.
    SymmetricMatrix(usize),
    /// `r2 = γ r` and `‖r - r2‖ ≥ 1`.
    ScaledWithGap { r: usize, r2: usize, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { sweeps: 1000, tol: 1e-12 }
    }
}

/// One row of the constraint audit log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditRecord {
    pub update: usize,
    pub rule: usize,
    pub violation: f64,
}

impl AuditRecord {
    pub fn csv_header() -> &'static str {
        "update_index,rule_id,violation"
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{:e}", self.update, self.rule, self.violation)
    }
}

/// Constraints compiled from a rule list for one model, tagged with the
/// index of the rule that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub spec: ModelSpec,
    pub domain: EntityDomain,
    pub constraints: Vec<(usize, Constraint)>,
    rule_entities: Vec<usize>,
}

fn block_len(spec: &ModelSpec, b: Block) -> usize {
    match b {
        Block::Rel { part: Part::Whole, .. } => spec.learnable_rel_dim(),
        _ => spec.ent_dim,
    }
}

fn get(p: &ModelParams, b: Block) -> &[f64] {
    let n = p.spec.ent_dim;
    match b {
        Block::Ent(e) => &p.entities[e],
        Block::Rel { rel, part } => {
            let v = &p.relations[rel];
            match part {
                Part::First => &v[..n],
                Part::Second => &v[n..2 * n],
                Part::Whole => &v[..p.spec.learnable_rel_dim()],
            }
        }
    }
}

fn get_mut(p: &mut ModelParams, b: Block) -> &mut [f64] {
    let n = p.spec.ent_dim;
    let learnable = p.spec.learnable_rel_dim();
    match b {
        Block::Ent(e) => &mut p.entities[e],
        Block::Rel { rel, part } => {
            let v = &mut p.relations[rel];
            match part {
                Part::First => &mut v[..n],
                Part::Second => &mut v[n..2 * n],
                Part::Whole => &mut v[..learnable],
            }
        }
    }
}

fn merge(terms: &[(f64, Block)]) -> LinExpr {
    let mut out: LinExpr = Vec::with_capacity(terms.len());
    for &(c, b) in terms {
        match out.iter_mut().find(|(_, ob)| *ob == b) {
            Some(t) => t.0 += c,
            None => out.push((c, b)),
        }
    }
    out.retain(|(c, _)| *c != 0.0);
    out
}

fn difference(lhs: &LinExpr, rhs: &LinExpr, sign: f64) -> LinExpr {
    let mut v = lhs.clone();
    v.extend(rhs.iter().map(|&(c, b)| (sign * c, b)));
    merge(&v)
}

fn eval(p: &ModelParams, terms: &[(f64, Block)], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for &(c, b) in terms {
        for (o, x) in out.iter_mut().zip(get(p, b)) {
            *o += c * x;
        }
    }
    out
}

fn expr_len(p: &ModelParams, terms: &[(f64, Block)]) -> usize {
    terms.first().map_or(0, |&(_, b)| block_len(&p.spec, b))
}

fn split(terms: &LinExpr, kind: BlockKind) -> (LinExpr, LinExpr) {
    terms.iter().partition(|(_, b)| b.kind() == kind)
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Eq,
}

/// Projects onto `{expr ≤ 0}` or `{expr = 0}` coordinatewise, moving only
/// blocks of `kind`.
fn project_coordwise(p: &mut ModelParams, expr: &LinExpr, kind: BlockKind, sense: Sense) {
    let (free, fixed) = split(expr, kind);
    let norm2: f64 = free.iter().map(|(c, _)| c * c).sum();
    if norm2 == 0.0 {
        return;
    }
    let len = expr_len(p, expr);
    let base = eval(p, &fixed, len);
    for (i, b) in base.iter().enumerate() {
        let s = b + free.iter().map(|&(c, blk)| c * get(p, blk)[i]).sum::<f64>();
        let excess = match sense {
            Sense::Le => s.max(0.0),
            Sense::Eq => s,
        };
        if excess != 0.0 {
            for &(c, blk) in &free {
                get_mut(p, blk)[i] -= c * excess / norm2;
            }
        }
    }
}

fn project_sandwich_expr(p: &mut ModelParams, low: &LinExpr, mid: &LinExpr, kind: BlockKind) {
    let (lf, lx) = split(low, kind);
    let (mf, mx) = split(mid, kind);
    let unit = |t: &LinExpr| t.len() == 1 && t[0].0.abs() == 1.0;
    if unit(&lf) && unit(&mf) && lf[0].1 != mf[0].1 {
        let len = expr_len(p, low);
        let cu = eval(p, &lx, len);
        let cv = eval(p, &mx, len);
        let (su, bu) = lf[0];
        let (sv, bv) = mf[0];
        for i in 0..len {
            let u = su * get(p, bu)[i] + cu[i];
            let v = sv * get(p, bv)[i] + cv[i];
            let (u2, v2) = project_sandwich_point(u, v);
            get_mut(p, bu)[i] = (u2 - cu[i]) * su;
            get_mut(p, bv)[i] = (v2 - cv[i]) * sv;
        }
    } else {
        project_coordwise(p, &difference(low, mid, -1.0), kind, Sense::Le);
        project_coordwise(p, &difference(low, mid, 1.0), kind, Sense::Le);
    }
}

fn add_into(normals: &mut Vec<(Block, Vec<f64>)>, b: Block, c: f64, v: &[f64]) {
    let idx = match normals.iter().position(|(nb, _)| *nb == b) {
        Some(i) => i,
        None => {
            normals.push((b, vec![0.0; v.len()]));
            normals.len() - 1
        }
    };
    for (n, x) in normals[idx].1.iter_mut().zip(v) {
        *n += c * x;
    }
}

fn inner_value(p: &ModelParams, terms: &[(f64, Block, Block)]) -> f64 {
    terms.iter().map(|&(c, a, b)| c * dot(get(p, a), get(p, b))).sum()
}

/// Halfspace step on the free blocks with the other factor of each product
/// held fixed.
fn project_inner(p: &mut ModelParams, terms: &[(f64, Block, Block)], kind: BlockKind) {
    let s = inner_value(p, terms);
    if s >= 0.0 {
        return;
    }
    let mut normals: Vec<(Block, Vec<f64>)> = Vec::new();
    for &(c, a, b) in terms {
        if a.kind() == kind {
            add_into(&mut normals, a, c, get(p, b));
        }
        if b.kind() == kind {
            add_into(&mut normals, b, c, get(p, a));
        }
    }
    let norm2: f64 = normals.iter().map(|(_, n)| dot(n, n)).sum();
    if norm2 == 0.0 {
        return;
    }
    let step = -s / norm2;
    for (b, n) in &normals {
        for (x, ni) in get_mut(p, *b).iter_mut().zip(n) {
            *x += step * ni;
        }
    }
}

fn project_ball_orthant_expr(p: &mut ModelParams, center: &LinExpr, kind: BlockKind) {
    let len = expr_len(p, center);
    match kind {
        BlockKind::Entity => {
            let moves_center = center.iter().any(|(_, b)| b.kind() == BlockKind::Entity);
            let mut a = eval(p, center, len);
            for e in 0..p.entities.len() {
                if moves_center {
                    a = eval(p, center, len);
                }
                let x = ball_orthant_dykstra(&p.entities[e], &a);
                p.entities[e] = x;
            }
        }
        BlockKind::Relation => {
            // For each entity x: <x, a> ≥ ‖x‖²/2, a halfspace in the relation
            // blocks of `a`.
            let (free, _) = split(center, BlockKind::Relation);
            let cn2: f64 = free.iter().map(|(c, _)| c * c).sum();
            if cn2 == 0.0 {
                return;
            }
            for e in 0..p.entities.len() {
                let x = p.entities[e].clone();
                let xx = dot(&x, &x);
                if xx == 0.0 {
                    continue;
                }
                let a = eval(p, center, len);
                let slack = dot(&x, &a) - 0.5 * xx;
                if slack < 0.0 {
                    let step = -slack / (cn2 * xx);
                    for &(c, b) in &free {
                        for (v, xi) in get_mut(p, b).iter_mut().zip(&x) {
                            *v += step * c * xi;
                        }
                    }
                }
            }
        }
    }
}

fn ball_orthant_violation(p: &ModelParams, center: &LinExpr) -> f64 {
    let a = eval(p, center, expr_len(p, center));
    let rad = dot(&a, &a).sqrt();
    p.entities
        .iter()
        .map(|x| {
            let neg = x.iter().fold(0.0f64, |m, &v| m.max(-v));
            let d = x.iter().zip(&a).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            neg.max(d - rad)
        })
        .fold(0.0, f64::max)
}

impl Constraint {
    fn blocks(&self) -> Vec<Block> {
        let rel = |r| Block::Rel { rel: r, part: Part::Whole };
        match self {
            Constraint::ElemLe { lhs, rhs } | Constraint::AffineEq { lhs, rhs } => {
                lhs.iter().chain(rhs).map(|t| t.1).collect()
            }
            Constraint::Sandwich { low, mid } => low.iter().chain(mid).map(|t| t.1).collect(),
            Constraint::InnerProdGe(t) => t.iter().flat_map(|&(_, a, b)| [a, b]).collect(),
            Constraint::BallOrthant(c) => c.iter().map(|t| t.1).collect(),
            Constraint::TransposeLe { r, r2 } | Constraint::ScaledWithGap { r, r2, .. } => {
                vec![rel(*r), rel(*r2)]
            }
            Constraint::SymmetricMatrix(r) => vec![rel(*r)],
        }
    }

    /// Whether projecting with only `kind` blocks free can change anything.
    pub fn acts_on(&self, kind: BlockKind) -> bool {
        if let Constraint::BallOrthant(_) = self {
            // the entity half always moves the constrained entities
            return kind == BlockKind::Entity || self.blocks().iter().any(|b| b.kind() == kind);
        }
        self.blocks().iter().any(|b| b.kind() == kind)
    }

    pub fn project(&self, p: &mut ModelParams, kind: BlockKind) {
        match self {
            Constraint::ElemLe { lhs, rhs } => {
                project_coordwise(p, &difference(lhs, rhs, -1.0), kind, Sense::Le)
            }
            Constraint::AffineEq { lhs, rhs } => {
                project_coordwise(p, &difference(lhs, rhs, -1.0), kind, Sense::Eq)
            }
            Constraint::Sandwich { low, mid } => {
                project_sandwich_expr(p, &merge(low), &merge(mid), kind)
            }
            Constraint::InnerProdGe(terms) => project_inner(p, terms, kind),
            Constraint::BallOrthant(center) => project_ball_orthant_expr(p, center, kind),
            Constraint::TransposeLe { r, r2 } if kind == BlockKind::Relation => {
                let n = p.spec.ent_dim;
                if r == r2 {
                    symmetrize(&mut p.relations[*r], n);
                    return;
                }
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (p.relations[*r][i + j * n], p.relations[*r2][j + i * n]);
                        if a > b {
                            let m = 0.5 * (a + b);
                            p.relations[*r][i + j * n] = m;
                            p.relations[*r2][j + i * n] = m;
                        }
                    }
                }
            }
            Constraint::SymmetricMatrix(r) if kind == BlockKind::Relation => {
                symmetrize(&mut p.relations[*r], p.spec.ent_dim)
            }
            Constraint::ScaledWithGap { r, r2, gamma } if kind == BlockKind::Relation => {
                // Nearest point of {(x, γx)} is x* = (r + γ r2)/(1 + γ²); the
                // gap ‖x - γx‖ ≥ 1 is a norm floor on x.
                let g = *gamma;
                let min_norm = 1.0 / (1.0 - g);
                let mut x: Vec<f64> = p.relations[*r]
                    .iter()
                    .zip(&p.relations[*r2])
                    .map(|(a, b)| (a + g * b) / (1.0 + g * g))
                    .collect();
                let norm = dot(&x, &x).sqrt();
                if norm < min_norm {
                    if norm > 0.0 {
                        x.iter_mut().for_each(|v| *v *= min_norm / norm);
                    } else {
                        x[0] = min_norm;
                    }
                }
                p.relations[*r2] = x.iter().map(|v| g * v).collect();
                p.relations[*r] = x;
            }
            _ => {}
        }
    }

    pub fn violation(&self, p: &ModelParams) -> f64 {
        match self {
            Constraint::ElemLe { lhs, rhs } => {
                let e = difference(lhs, rhs, -1.0);
                eval(p, &e, expr_len(p, &e)).into_iter().fold(0.0, f64::max)
            }
            Constraint::AffineEq { lhs, rhs } => {
                let e = difference(lhs, rhs, -1.0);
                eval(p, &e, expr_len(p, &e)).into_iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            Constraint::Sandwich { low, mid } => {
                let len = expr_len(p, low).max(expr_len(p, mid));
                let u = eval(p, low, len);
                let v = eval(p, mid, len);
                u.iter()
                    .zip(&v)
                    .map(|(u, v)| (u - v).max(u + v))
                    .fold(0.0, f64::max)
            }
            Constraint::InnerProdGe(t) => (-inner_value(p, t)).max(0.0),
            Constraint::BallOrthant(c) => ball_orthant_violation(p, c),
            Constraint::TransposeLe { r, r2 } => {
                let n = p.spec.ent_dim;
                let mut worst = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max(p.relations[*r][i + j * n] - p.relations[*r2][j + i * n]);
                    }
                }
                worst
            }
            Constraint::SymmetricMatrix(r) => {
                let n = p.spec.ent_dim;
                let v = &p.relations[*r];
                let mut worst = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((v[i + j * n] - v[j + i * n]).abs());
                    }
                }
                worst
            }
            Constraint::ScaledWithGap { r, r2, gamma } => {
                let (a, b) = (&p.relations[*r], &p.relations[*r2]);
                let off = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((y - gamma * x).abs()));
                let gap = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                off.max(1.0 - gap)
            }
        }
    }
}

fn symmetrize(v: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (v[i + j * n] + v[j + i * n]);
            v[i + j * n] = m;
            v[j + i * n] = m;
        }
    }
}

impl FeasibleSet {
    /// No rules: the projection is the identity.
    pub fn unconstrained(spec: ModelSpec) -> Self {
        FeasibleSet {
            spec,
            domain: EntityDomain::Free,
            constraints: Vec::new(),
            rule_entities: Vec::new(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.constraints.is_empty() && self.domain == EntityDomain::Free
    }

    fn has_ball_orthant(&self) -> bool {
        self.constraints
            .iter()
            .any(|(_, c)| matches!(c, Constraint::BallOrthant(_)))
    }

    fn active_violation(&self, p: &ModelParams, kind: BlockKind) -> f64 {
        let mut worst = if kind == BlockKind::Entity {
            entity_domain_violation(p, self.domain)
        } else {
            0.0
        };
        for (_, c) in &self.constraints {
            if c.acts_on(kind) {
                worst = worst.max(c.violation(p));
            }
        }
        worst
    }

    /// Cyclic projection of the `kind` blocks. `touched` lists the entities
    /// changed by the preceding gradient step (`None` means all). Returns the
    /// largest remaining violation among constraints that act on `kind`.
    pub fn project(
        &self,
        p: &mut ModelParams,
        kind: BlockKind,
        touched: Option<&[usize]>,
        cfg: &ProjectionConfig,
    ) -> f64 {
        if self.is_unconstrained() {
            return 0.0;
        }
        let mut domain_ids: Option<Vec<usize>> = touched.map(|t| {
            let mut ids: Vec<usize> = t.iter().chain(&self.rule_entities).copied().collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        });
        if self.has_ball_orthant() {
            domain_ids = None;
        }
        let mut worst = 0.0;
        for _ in 0..cfg.sweeps.max(1) {
            if kind == BlockKind::Entity {
                project_entity_domain(p, self.domain, domain_ids.as_deref());
            }
            for (_, c) in &self.constraints {
                if c.acts_on(kind) {
                    c.project(p, kind);
                }
            }
            worst = self.active_violation(p, kind);
            if worst <= cfg.tol {
                break;
            }
        }
        worst
    }

    /// Alternates relation and entity projections until every constraint
    /// holds within `cfg.tol` or `rounds` is exhausted. Returns the largest
    /// remaining violation.
    pub fn project_all(&self, p: &mut ModelParams, cfg: &ProjectionConfig, rounds: usize) -> f64 {
        for _ in 0..rounds {
            self.project(p, BlockKind::Relation, None, cfg);
            self.project(p, BlockKind::Entity, None, cfg);
            if self.max_violation(p) <= cfg.tol {
                break;
            }
        }
        self.max_violation(p)
    }

    /// Violation of each rule's constraints, keyed by rule index.
    pub fn rule_violations(&self, p: &ModelParams) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (rule, c) in &self.constraints {
            let v = c.violation(p);
            match out.iter_mut().find(|(r, _)| r == rule) {
                Some(slot) => slot.1 = slot.1.max(v),
                None => out.push((*rule, v)),
            }
        }
        out
    }

    pub fn max_violation(&self, p: &ModelParams) -> f64 {
        self.rule_violations(p)
            .into_iter()
            .map(|(_, v)| v)
            .fold(entity_domain_violation(p, self.domain), f64::max)
    }
}

fn unsupported(rule: &Rule, kind: ModelKind) -> Error {
    Error::UnsupportedRule {
        rule: rule.name().to_string(),
        model: kind.to_string(),
    }
}

/// Compiles `rules` into the constraint set for `spec`. `lambda` is the
/// ProTrans mixing weight and `rho` the entity-ball radius of model T.
pub fn compile(rules: &[Rule], spec: ModelSpec, lambda: f64, rho: f64) -> Result<FeasibleSet> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if rules.is_empty() {
        return Ok(FeasibleSet::unconstrained(spec));
    }
    use Constraint::*;
    use ModelKind as M;
    let first = |r| Block::Rel { rel: r, part: Part::First };
    let second = |r| Block::Rel { rel: r, part: Part::Second };
    let whole = |r| Block::Rel { rel: r, part: Part::Whole };
    let ent = Block::Ent;
    let kind = spec.kind;
    let mut out = Vec::new();
    let mut rule_entities = Vec::new();

    for (id, rule) in rules.iter().enumerate() {
        rule_entities.extend(rule.entities());
        let mut push = |c: Constraint| out.push((id, c));
        match *rule {
            Rule::RelImp { r, r2 } => match kind {
                _ if r == r2 => {}
                M::A | M::B | M::R | M::Tucker2 => push(ElemLe {
                    lhs: vec![(1.0, whole(r))],
                    rhs: vec![(1.0, whole(r2))],
                }),
                M::C | M::D => push(Sandwich {
                    low: vec![(1.0, whole(r))],
                    mid: vec![(1.0, whole(r2))],
                }),
                M::T => push(ScaledWithGap {
                    r,
                    r2,
                    gamma: (4.0 * rho - 1.0) / (4.0 * rho + 1.0),
                }),
            },
            Rule::RevImp { r, r2 } => match kind {
                M::A | M::B => {
                    push(ElemLe { lhs: vec![(1.0, first(r))], rhs: vec![(1.0, second(r2))] });
                    push(ElemLe { lhs: vec![(1.0, second(r))], rhs: vec![(1.0, first(r2))] });
                }
                M::C | M::D => {
                    push(Sandwich { low: vec![(1.0, first(r))], mid: vec![(1.0, second(r2))] });
                    push(Sandwich { low: vec![(1.0, second(r))], mid: vec![(1.0, first(r2))] });
                }
                M::R => push(TransposeLe { r, r2 }),
                _ => return Err(unsupported(rule, kind)),
            },
            Rule::Symm { r } => match kind {
                M::A | M::B | M::C | M::D => push(AffineEq {
                    lhs: vec![(1.0, first(r))],
                    rhs: vec![(1.0, second(r))],
                }),
                M::R => push(SymmetricMatrix(r)),
                M::T => push(AffineEq { lhs: vec![(1.0, whole(r))], rhs: vec![] }),
                M::Tucker2 => return Err(unsupported(rule, kind)),
            },
            Rule::EntailB { r, e, r2, e2 } => {
                let inner = InnerProdGe(vec![(1.0, second(r2), ent(e2)), (-1.0, second(r), ent(e))]);
                match kind {
                    M::A => {
                        push(ElemLe { lhs: vec![(1.0, first(r))], rhs: vec![(1.0, first(r2))] });
                        push(inner);
                    }
                    M::B => {
                        push(ElemLe {
                            lhs: vec![(1.0, first(r)), (1.0, ent(e)), (-1.0, ent(e2))],
                            rhs: vec![(1.0, first(r2))],
                        });
                        push(inner);
                    }
                    M::C | M::D => {
                        if kind == M::D {
                            push(ElemLe {
                                lhs: vec![(1.0, first(r)), (-1.0, first(r2))],
                                rhs: vec![(1.0, ent(e2)), (-1.0, ent(e))],
                            });
                            push(ElemLe { lhs: vec![(1.0, ent(e2))], rhs: vec![(1.0, ent(e))] });
                        }
                        push(Sandwich { low: vec![(1.0, first(r))], mid: vec![(1.0, first(r2))] });
                        push(Sandwich {
                            low: vec![(1.0, second(r)), (-1.0, ent(e))],
                            mid: vec![(1.0, second(r2)), (-1.0, ent(e2))],
                        });
                    }
                    _ => return Err(unsupported(rule, kind)),
                }
            }
            Rule::ProTrans { r, r2, e2, r3, e3 } => {
                let l = lambda;
                let inner = InnerProdGe(vec![(1.0, second(r3), ent(e3)), (-(1.0 - l), second(r2), ent(e2))]);
                match kind {
                    M::A => {
                        push(ElemLe { lhs: vec![(l, first(r))], rhs: vec![(1.0, first(r3))] });
                        push(ElemLe {
                            lhs: vec![(l, second(r)), (1.0 - l, first(r2))],
                            rhs: vec![],
                        });
                        push(inner);
                    }
                    M::B => {
                        // a = (r₁'' - λ r₁ + e'')/λ
                        let a: LinExpr = vec![(1.0 / l, first(r3)), (-1.0, first(r)), (1.0 / l, ent(e3))];
                        push(AffineEq {
                            lhs: vec![
                                (1.0, first(r3)),
                                (-l, first(r)),
                                (1.0, ent(e3)),
                                (l, second(r)),
                                (1.0 - l, first(r2)),
                                (1.0 - l, ent(e2)),
                            ],
                            rhs: vec![],
                        });
                        push(inner);
                        push(ElemLe { lhs: vec![], rhs: a.clone() });
                        push(BallOrthant(a));
                    }
                    _ => return Err(unsupported(rule, kind)),
                }
            }
            Rule::TypeImp { r, e, r2 } => match kind {
                M::A => {
                    push(ElemLe { lhs: vec![(1.0, first(r))], rhs: vec![(1.0, first(r2))] });
                    push(InnerProdGe(vec![(1.0, second(r2), ent(e))]));
                    push(ElemLe { lhs: vec![(1.0, second(r))], rhs: vec![] });
                }
                M::B => {
                    push(AffineEq {
                        lhs: vec![(1.0, ent(e)), (1.0, first(r2))],
                        rhs: vec![(1.0, first(r)), (-1.0, second(r))],
                    });
                    push(InnerProdGe(vec![(1.0, second(r2), ent(e))]));
                    push(ElemLe { lhs: vec![(1.0, second(r))], rhs: vec![] });
                    push(BallOrthant(vec![(-1.0, second(r))]));
                }
                _ => return Err(unsupported(rule, kind)),
            },
        }
    }
    for (_, c) in &mut out {
        if let Constraint::ElemLe { lhs, rhs } | Constraint::AffineEq { lhs, rhs } = c {
            *lhs = merge(lhs);
            *rhs = merge(rhs);
        }
    }
    rule_entities.sort_unstable();
    rule_entities.dedup();
    let domain = match kind {
        M::T => EntityDomain::Ball(rho),
        _ => EntityDomain::Orthant,
    };
    Ok(FeasibleSet {
        spec,
        domain,
        constraints: out,
        rule_entities,
    })
}

/// Compiles `rules` and projects `params` onto the feasible set by
/// alternating relation and entity projections. Returns the remaining
/// maximum violation.
pub fn project_rules(
    params: &mut ModelParams,
    rules: &[Rule],
    lambda: f64,
    rho: f64,
    cfg: &ProjectionConfig,
) -> Result<f64> {
    let set = compile(rules, params.spec, lambda, rho)?;
    Ok(set.project_all(params, cfg, 200))
}
