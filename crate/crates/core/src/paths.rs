//! The parent map G, the path tree rooted at the true support T, canonical
//! paths, edge loadings, and the Sinclair bound on 1/gap.
//!
//! Region names follow the construction:
//!
//! * `U` = {S != T : |S \ T| <= 3 s*};
//! * `S_T` = {S != T : S contains T}.
//!
//! G removes the smallest extra index on `U ∩ S_T`, adds the best missing
//! true index on `U \ S_T`, and sends everything outside `U` to T-hat.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{ChainConfig, ProblemInstance};
use crate::posterior::{log_sum_exp, ExactPosterior, ORACLE_STATE_CAP};
use crate::projection::ProjectionState;
use crate::proposal::ProposalKernel;
use crate::subset::Subset;

/// Exact pair enumeration costs O(4^p); it is refused above this dimension.
pub const PAIR_ENUMERATION_MAX_P: usize = 10;

const PAIR_CHUNK: usize = 64;

/// Relative tolerance under which two candidate projection norms in the
/// adding step count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Membership tests for the regions of the construction.
#[derive(Clone, Copy, Debug)]
pub struct Regions {
    pub t: Subset,
    pub t_hat: Subset,
    pub s_star: usize,
}

impl Regions {
    pub fn new(inst: &ProblemInstance, cfg: &ChainConfig) -> Self {
        Regions {
            t: inst.support(),
            t_hat: cfg.t_hat,
            s_star: inst.s_star(),
        }
    }

    pub fn in_u(&self, s: Subset) -> bool {
        s != self.t && s.difference(&self.t).size() <= 3 * self.s_star
    }

    /// Strict supersets of T.
    pub fn in_s_t(&self, s: Subset) -> bool {
        s != self.t && self.t.is_subset_of(&s)
    }

    pub fn in_core(&self, s: Subset) -> bool {
        s.size() <= 3 * self.s_star
    }
}

/// G(S).
pub fn g_map(s: Subset, inst: &ProblemInstance, cfg: &ChainConfig) -> Result<Subset> {
    let reg = Regions::new(inst, cfg);
    if s.dim() != inst.p() {
        return Err(Error::DimensionMismatch {
            expected: inst.p(),
            found: s.dim(),
        });
    }
    if s == reg.t {
        return Err(Error::RootHasNoParent);
    }
    if !reg.in_u(s) {
        return Ok(reg.t_hat);
    }
    if reg.in_s_t(s) {
        let i = s.difference(&reg.t).smallest().expect("strict superset");
        return Ok(s.without(i));
    }
    let st = ProjectionState::from_subset(inst.x(), s)?;
    let base = st.project_sq_norm(inst.mean())?;
    let mut best: Option<(usize, f64)> = None;
    for i in reg.t.difference(&s).indices() {
        let v = base + st.preview_column(i)?.delta(inst.mean());
        match best {
            Some((_, b)) if v <= b * (1.0 + TIE_RTOL) => {}
            _ => best = Some((i, v)),
        }
    }
    let (i, _) = best.expect("T \\ S is nonempty");
    Ok(s.with(i))
}

/// The directed tree of edges (S, G(S)), indexed by bit pattern.
#[derive(Clone, Debug)]
pub struct GTree {
    p: usize,
    root: Subset,
    parent: Vec<Option<u64>>,
    depth: Vec<usize>,
    children: Vec<Vec<u64>>,
}

impl GTree {
    fn subset(&self, bits: u64) -> Subset {
        Subset::from_bits(self.p, bits).expect("in range")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn root(&self) -> Subset {
        self.root
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = Subset> + '_ {
        (0..self.len() as u64).map(move |b| self.subset(b))
    }

    pub fn parent(&self, s: Subset) -> Option<Subset> {
        self.parent[s.bits() as usize].map(|b| self.subset(b))
    }

    /// Tree distance to the root.
    pub fn depth(&self, s: Subset) -> usize {
        self.depth[s.bits() as usize]
    }

    pub fn children(&self, s: Subset) -> Vec<Subset> {
        self.children[s.bits() as usize]
            .iter()
            .map(|&b| self.subset(b))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    /// `s`, G(s), G(G(s)), ..., T.
    pub fn ancestors(&self, s: Subset) -> Vec<Subset> {
        let mut out = vec![s];
        let mut cur = s;
        while let Some(par) = self.parent(cur) {
            out.push(par);
            cur = par;
        }
        out
    }

    /// First common state of the two G-paths to the root.
    pub fn meeting_point(&self, a: Subset, b: Subset) -> Subset {
        let (mut x, mut y) = (a.bits(), b.bits());
        while self.depth[x as usize] > self.depth[y as usize] {
            x = self.parent[x as usize].expect("non-root");
        }
        while self.depth[y as usize] > self.depth[x as usize] {
            y = self.parent[y as usize].expect("non-root");
        }
        while x != y {
            x = self.parent[x as usize].expect("non-root");
            y = self.parent[y as usize].expect("non-root");
        }
        self.subset(x)
    }

    /// Length of the tree path between two states.
    pub fn distance(&self, a: Subset, b: Subset) -> usize {
        let m = self.meeting_point(a, b);
        self.depth(a) + self.depth(b) - 2 * self.depth(m)
    }

    /// States in order of decreasing depth, so children precede parents.
    fn bottom_up(&self) -> Vec<u64> {
        let mut order: Vec<u64> = (0..self.len() as u64).collect();
        order.sort_by_key(|&b| std::cmp::Reverse(self.depth[b as usize]));
        order
    }

    /// Graphviz rendering: one node per state labeled with its hex mask and
    /// size, states of equal size on one rank, edges pointing from S to G(S).
    pub fn write_dot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "digraph gtree {{")?;
        writeln!(out, "  node [shape=box, fontname=\"monospace\"];")?;
        for size in 0..=self.p {
            let mut line = String::new();
            for s in self.states().filter(|s| s.size() == size) {
                let _ = write!(line, " \"{}\";", s.to_hex());
            }
            if !line.is_empty() {
                writeln!(out, "  {{ rank=same;{line} }}")?;
            }
        }
        for s in self.states() {
            let shape = if s == self.root { ", shape=doublecircle" } else { "" };
            writeln!(
                out,
                "  \"{}\" [label=\"{} |{}|\"{}];",
                s.to_hex(),
                s.to_hex(),
                s.size(),
                shape
            )?;
        }
        for s in self.states() {
            if let Some(par) = self.parent(s) {
                writeln!(out, "  \"{}\" -> \"{}\";", s.to_hex(), par.to_hex())?;
            }
        }
        writeln!(out, "}}")?;
        Ok(())
    }
}

pub fn build_tree(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<GTree> {
    build_tree_with_cap(inst, cfg, ORACLE_STATE_CAP)
}

pub fn build_tree_with_cap(inst: &ProblemInstance, cfg: &ChainConfig, cap: u128) -> Result<GTree> {
    let p = inst.p();
    let states = 1u128 << p;
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    let n = states as usize;
    let root = inst.support();
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    for b in 0..n as u64 {
        let s = Subset::from_bits(p, b)?;
        if s == root {
            continue;
        }
        let g = g_map(s, inst, cfg)?;
        parent[b as usize] = Some(g.bits());
        children[g.bits() as usize].push(b);
    }

    // depths by walking up; 0 = unvisited, 1 = on the current walk, 2 = done
    let mut depth = vec![0usize; n];
    let mut mark = vec![0u8; n];
    mark[root.bits() as usize] = 2;
    for start in 0..n {
        if mark[start] == 2 {
            continue;
        }
        let mut walk = Vec::new();
        let mut cur = start;
        while mark[cur] != 2 {
            if mark[cur] == 1 {
                return Err(Error::CycleDetected(Subset::from_bits(p, cur as u64)?));
            }
            mark[cur] = 1;
            walk.push(cur);
            cur = parent[cur].expect("non-root has a parent") as usize;
        }
        let mut d = depth[cur];
        for &w in walk.iter().rev() {
            d += 1;
            depth[w] = d;
            mark[w] = 2;
        }
    }
    Ok(GTree {
        p,
        root,
        parent,
        depth,
        children,
    })
}

/// Lambda(S): S and every state whose G-path to the root passes through S.
pub fn lambda_set(s: Subset, tree: &GTree) -> Vec<Subset> {
    let mut out = Vec::new();
    let mut stack = vec![s];
    while let Some(x) = stack.pop() {
        out.push(x);
        stack.extend(tree.children(x));
    }
    out.sort();
    out
}

/// log pi(Lambda(S)) for every S, indexed by bit pattern.
pub fn log_lambda_masses(tree: &GTree, post: &ExactPosterior) -> Vec<f64> {
    let mut acc: Vec<f64> = post.log_probs().to_vec();
    for b in tree.bottom_up() {
        if let Some(par) = tree.parent[b as usize] {
            let (x, y) = (acc[par as usize], acc[b as usize]);
            acc[par as usize] = log_add(x, y);
        }
    }
    acc
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// gamma(I, F): up from I to the meeting point, then down to F. Both
/// endpoints included.
pub fn canonical_path(i: Subset, f: Subset, tree: &GTree) -> Vec<Subset> {
    let m = tree.meeting_point(i, f);
    let mut path: Vec<Subset> = tree.ancestors(i).into_iter().take_while(|s| *s != m).collect();
    path.push(m);
    let down: Vec<Subset> = tree.ancestors(f).into_iter().take_while(|s| *s != m).collect();
    path.extend(down.into_iter().rev());
    path
}

/// Longest tree path between two states (the tree's diameter).
pub fn max_path_length(tree: &GTree) -> usize {
    // height[x] = longest downward path from x
    let mut height = vec![0usize; tree.len()];
    let mut best = 0;
    for b in tree.bottom_up() {
        let mut top2 = [0usize; 2];
        for &c in &tree.children[b as usize] {
            let h = height[c as usize] + 1;
            if h > top2[0] {
                top2 = [h, top2[0]];
            } else if h > top2[1] {
                top2[1] = h;
            }
        }
        height[b as usize] = top2[0];
        best = best.max(top2[0] + top2[1]);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// From S to G(S).
    Up,
    /// From G(S) to S.
    Down,
}

/// Loading of one directed tree edge.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeLoading {
    #[serde(with = "crate::instance::subset_serde")]
    pub from: Subset,
    #[serde(with = "crate::instance::subset_serde")]
    pub to: Subset,
    pub direction: Direction,
    /// Edge weight min{pi(S) R(S,S'), pi(S') R(S',S)}.
    pub q: f64,
    pub log_q: f64,
    /// pi(Lambda(S)) for the child endpoint S.
    pub lambda_mass: f64,
    /// pi(Lambda)(1 - pi(Lambda)) / Q.
    pub rho_bound: f64,
    /// Sum over canonical paths through the edge of pi(I) pi(F) / Q, when
    /// the pair enumeration was run.
    pub rho_exact: Option<f64>,
}

impl EdgeLoading {
    pub fn rho(&self) -> f64 {
        self.rho_exact.unwrap_or(self.rho_bound)
    }
}

/// Running sum in the log domain: value = s * exp(m).
#[derive(Clone, Copy, Debug)]
struct LogAcc {
    m: f64,
    s: f64,
}

impl LogAcc {
    const ZERO: LogAcc = LogAcc {
        m: f64::NEG_INFINITY,
        s: 0.0,
    };

    fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t <= self.m {
            self.s += (t - self.m).exp();
        } else {
            self.s = self.s * (self.m - t).exp() + 1.0;
            self.m = t;
        }
    }

    fn merge(mut self, other: LogAcc) -> LogAcc {
        if other.s > 0.0 {
            self.add(other.m + other.s.ln());
        }
        self
    }

    fn log(&self) -> f64 {
        if self.s == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.m + self.s.ln()
        }
    }
}

/// log of the summed pi(I) pi(F) over ordered pairs whose canonical path
/// uses each directed edge. Up edge of S has id `bits(S)`, its down edge
/// `2^p + bits(S)`.
fn pair_enumeration(tree: &GTree, post: &ExactPosterior) -> Vec<f64> {
    let n = tree.len();
    let lp = post.log_probs();
    // fixed chunks merged in order keep the sums bit-reproducible
    let starts: Vec<u64> = (0..n as u64).step_by(PAIR_CHUNK).collect();
    let partial: Vec<Vec<LogAcc>> = starts
        .par_iter()
        .map(|&lo| {
            let mut acc = vec![LogAcc::ZERO; 2 * n];
            for i in lo..(lo + PAIR_CHUNK as u64).min(n as u64) {
                for f in 0..n as u64 {
                    if f == i {
                        continue;
                    }
                    let t = lp[i as usize] + lp[f as usize];
                    let (mut x, mut y) = (i, f);
                    while tree.depth[x as usize] > tree.depth[y as usize] {
                        acc[x as usize].add(t);
                        x = tree.parent[x as usize].expect("non-root");
                    }
                    while tree.depth[y as usize] > tree.depth[x as usize] {
                        acc[n + y as usize].add(t);
                        y = tree.parent[y as usize].expect("non-root");
                    }
                    while x != y {
                        acc[x as usize].add(t);
                        acc[n + y as usize].add(t);
                        x = tree.parent[x as usize].expect("non-root");
                        y = tree.parent[y as usize].expect("non-root");
                    }
                }
            }
            acc
        })
        .collect();
    let acc = partial
        .into_iter()
        .reduce(|a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect())
        .unwrap_or_default();
    acc.iter().map(LogAcc::log).collect()
}

/// Loadings of both directions of every tree edge. The exact pair
/// enumeration runs when `exact` is set and p is at most
/// [`PAIR_ENUMERATION_MAX_P`].
pub fn edge_loadings(
    inst: &ProblemInstance,
    cfg: &ChainConfig,
    tree: &GTree,
    post: &ExactPosterior,
    exact: bool,
) -> Result<Vec<EdgeLoading>> {
    if exact && tree.p() > PAIR_ENUMERATION_MAX_P {
        return Err(Error::StateSpaceTooLarge {
            states: 1u128 << (2 * tree.p()),
            cap: 1u128 << (2 * PAIR_ENUMERATION_MAX_P),
        });
    }
    let kernel = ProposalKernel::for_instance(inst, cfg)?;
    let n = tree.len();
    let log_lam = log_lambda_masses(tree, post);
    let pairs = if exact {
        Some(pair_enumeration(tree, post))
    } else {
        None
    };
    let mut out = Vec::with_capacity(2 * tree.edge_count());
    for s in tree.states() {
        let Some(g) = tree.parent(s) else { continue };
        let b = s.bits() as usize;
        let log_q = (post.log_prob(s) + kernel.log_prob(s, g)).min(post.log_prob(g) + kernel.log_prob(g, s));
        let ll = log_lam[b];
        let log_1m = if ll < -std::f64::consts::LN_2 {
            (-ll.exp()).ln_1p()
        } else {
            // complement summed directly to keep precision when Lambda is heavy
            let inside: std::collections::HashSet<Subset> = lambda_set(s, tree).into_iter().collect();
            log_sum_exp(
                tree.states()
                    .filter(|x| !inside.contains(x))
                    .map(|x| post.log_prob(x))
                    .collect::<Vec<_>>(),
            )
        };
        let rho_bound = (ll + log_1m - log_q).exp();
        for (dir, from, to, id) in [(Direction::Up, s, g, b), (Direction::Down, g, s, n + b)] {
            out.push(EdgeLoading {
                from,
                to,
                direction: dir,
                q: log_q.exp(),
                log_q,
                lambda_mass: ll.exp(),
                rho_bound,
                rho_exact: pairs.as_ref().map(|v| (v[id] - log_q).exp()),
            });
        }
    }
    Ok(out)
}

pub fn max_loading(loadings: &[EdgeLoading]) -> f64 {
    loadings.iter().map(EdgeLoading::rho).fold(0.0, f64::max)
}

/// (max path length) * (max loading); 1/gap(P) is at most this.
pub fn sinclair_bound(tree: &GTree, loadings: &[EdgeLoading]) -> f64 {
    max_path_length(tree) as f64 * max_loading(loadings)
}

/// CSV with columns `from_hex,to_hex,direction,q,lambda_mass,rho_bound,rho_exact`.
/// `rho_exact` is empty when the pair enumeration was skipped.
pub fn write_loadings_csv<W: Write>(loadings: &[EdgeLoading], mut out: W) -> Result<()> {
    writeln!(out, "from_hex,to_hex,direction,q,lambda_mass,rho_bound,rho_exact")?;
    for e in loadings {
        let dir = match e.direction {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        let exact = e.rho_exact.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{}",
            e.from.to_hex(),
            e.to.to_hex(),
            dir,
            e.q,
            e.lambda_mass,
            e.rho_bound,
            exact
        )?;
    }
    Ok(())
}

/// One failed instance of an inequality.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    #[serde(with = "crate::instance::subset_serde")]
    pub state: Subset,
    pub measured: f64,
    pub threshold: f64,
}

/// Outcome of checking `measured <= threshold` (or `>=`) over a family of
/// states. `worst_margin` is the smallest slack in the direction of the
/// inequality; negative means violated.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityFamily {
    pub name: String,
    pub checked: usize,
    pub worst_margin: f64,
    pub violations: Vec<Violation>,
}

impl InequalityFamily {
    fn new(name: &str) -> Self {
        InequalityFamily {
            name: name.into(),
            checked: 0,
            worst_margin: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    fn at_most(&mut self, s: Subset, measured: f64, threshold: f64) {
        self.record(s, measured, threshold, threshold - measured);
    }

    fn at_least(&mut self, s: Subset, measured: f64, threshold: f64) {
        self.record(s, measured, threshold, measured - threshold);
    }

    fn record(&mut self, s: Subset, measured: f64, threshold: f64, margin: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < 0.0 || margin.is_nan() {
            self.violations.push(Violation {
                state: s,
                measured,
                threshold,
            });
        }
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// P(S, S2) for S != S2 from the proposal kernel and log-weights.
pub fn transition_prob(kernel: &ProposalKernel, post: &ExactPosterior, s: Subset, s2: Subset) -> f64 {
    let r = kernel.prob(s, s2);
    if r == 0.0 {
        return 0.0;
    }
    let log_a = post.weight(s2).log_w - post.weight(s).log_w + kernel.log_prob(s2, s) - r.ln();
    if log_a >= 0.0 {
        r
    } else {
        r * log_a.exp()
    }
}

/// For every S != T: P(S, G(S)) >= 1/(2p) and pi(Lambda(S)) <= 3 pi(S).
/// Both families are in linear scale for the first and log scale for the
/// second (`log pi(Lambda(S)) <= log 3 + log pi(S)`).
pub fn check_pi_gmap(
    inst: &ProblemInstance,
    cfg: &ChainConfig,
    tree: &GTree,
    post: &ExactPosterior,
) -> Result<[InequalityFamily; 2]> {
    let kernel = ProposalKernel::for_instance(inst, cfg)?;
    let log_lam = log_lambda_masses(tree, post);
    let floor = 1.0 / (2.0 * inst.p() as f64);
    let mut step = InequalityFamily::new("step probability to the parent is at least 1/(2p)");
    let mut mass = InequalityFamily::new("descendant mass is at most three times the state's mass");
    for s in tree.states() {
        let Some(g) = tree.parent(s) else { continue };
        step.at_least(s, transition_prob(&kernel, post, s, g), floor);
        mass.at_most(s, log_lam[s.bits() as usize], 3f64.ln() + post.log_prob(s));
    }
    Ok([step, mass])
}

/// The four log-ratio families: against T-hat for all S, against G(S) on
/// U and on its complement, and monotonicity of pi along G inside U.
pub fn check_ratio_bounds(
    inst: &ProblemInstance,
    cfg: &ChainConfig,
    tree: &GTree,
    post: &ExactPosterior,
) -> [InequalityFamily; 4] {
    let reg = Regions::new(inst, cfg);
    let log_p = inst.log_p();
    let s_star = inst.s_star() as f64;
    let c_big = 2.0 * cfg.d + 4.0 / cfg.beta + 2.0 * cfg.c / cfg.beta;
    let lw = |s: Subset| post.weight(s).log_w;
    let mut vs_init = InequalityFamily::new("log-ratio to T-hat is at most -D|S|log(p)/2 + C s* log(p)");
    let mut in_u = InequalityFamily::new("log-ratio to the parent inside U is at most -D log(p)/2");
    let mut out_u = InequalityFamily::new("log-ratio to the parent outside U is at most -2|S| log(p)");
    let mut mono = InequalityFamily::new("pi does not decrease from S to its parent inside U");
    for s in tree.states() {
        let size = s.size() as f64;
        vs_init.at_most(
            s,
            lw(s) - lw(reg.t_hat),
            -0.5 * cfg.d * size * log_p + c_big * s_star * log_p,
        );
        let Some(g) = tree.parent(s) else { continue };
        let ratio = lw(s) - lw(g);
        if reg.in_u(s) {
            in_u.at_most(s, ratio, -0.5 * cfg.d * log_p);
            mono.at_least(s, lw(g), lw(s));
        } else {
            out_u.at_most(s, ratio, -2.0 * size * log_p);
        }
    }
    [vs_init, in_u, out_u, mono]
}

/// Depth bounds by region: strict supersets of T in U need at most
/// |S \ T| removals (|S| - s* when |T| = s*); T-hat at most 3s*; states
/// outside U at most 1 + 3s*; other states of U at most 4s*. Also checks
/// that G lowers the Hamming distance to T by exactly one inside U and
/// that U sits between CORE and {|S| <= 4s*}.
pub fn check_tree_structure(inst: &ProblemInstance, cfg: &ChainConfig, tree: &GTree) -> [InequalityFamily; 6] {
    let reg = Regions::new(inst, cfg);
    let s_star = inst.s_star();
    let mut a = InequalityFamily::new("depth of supersets of T inside U is at most |S \\ T|");
    let mut b = InequalityFamily::new("depth of T-hat is at most 3s*");
    let mut c = InequalityFamily::new("depth outside U is at most 1 + 3s*");
    let mut d = InequalityFamily::new("depth inside U but not above T is at most 4s*");
    let mut ham = InequalityFamily::new("G lowers the Hamming distance to T by one inside U");
    let mut sandwich = InequalityFamily::new("CORE within U within sizes up to 4s*");
    for s in tree.states() {
        let depth = tree.depth(s) as f64;
        if s == reg.t_hat && s != reg.t {
            b.at_most(s, depth, (3 * s_star) as f64);
        }
        if s == reg.t {
            continue;
        }
        if reg.in_u(s) {
            if reg.in_s_t(s) {
                a.at_most(s, depth, s.difference(&reg.t).size() as f64);
            } else {
                d.at_most(s, depth, (4 * s_star) as f64);
            }
            let g = tree.parent(s).expect("non-root");
            let drop = s.hamming(&reg.t) as f64 - g.hamming(&reg.t) as f64;
            ham.at_least(s, -(drop - 1.0).abs(), 0.0);
            sandwich.at_most(s, s.size() as f64, (4 * s_star) as f64);
        } else {
            c.at_most(s, depth, (1 + 3 * s_star) as f64);
        }
        if reg.in_core(s) {
            sandwich.at_least(s, f64::from(u8::from(reg.in_u(s))), 1.0);
        }
    }
    [a, b, c, d, ham, sandwich]
}

/// Tree, loadings and the resulting Sinclair bound for one instance.
#[derive(Clone, Debug)]
pub struct PathAnalysis {
    pub tree: GTree,
    pub loadings: Vec<EdgeLoading>,
    pub max_path_length: usize,
    pub max_rho: f64,
    pub sinclair: f64,
    /// Whether `rho_exact` is populated.
    pub exact_pairs: bool,
}

pub fn analyze_paths(inst: &ProblemInstance, cfg: &ChainConfig, post: &ExactPosterior) -> Result<PathAnalysis> {
    let tree = build_tree(inst, cfg)?;
    let exact = tree.p() <= PAIR_ENUMERATION_MAX_P;
    let loadings = edge_loadings(inst, cfg, &tree, post, exact)?;
    let max_path_length = max_path_length(&tree);
    let max_rho = max_loading(&loadings);
    Ok(PathAnalysis {
        sinclair: max_path_length as f64 * max_rho,
        tree,
        loadings,
        max_path_length,
        max_rho,
        exact_pairs: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::normalize_columns;
    use crate::posterior::exact_distribution;
    use crate::rng;
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, StandardNormal};

    fn setup(
        p: usize,
        n: usize,
        support: &[usize],
        t_hat: &[usize],
        s_star: usize,
        d: f64,
    ) -> (ProblemInstance, ChainConfig) {
        let mut r = rng::stream(42, rng::STREAM_DESIGN);
        let x = normalize_columns(&DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))).unwrap();
        let mut theta = DVector::zeros(p);
        for &j in support {
            theta[j] = 1.5;
        }
        let mut r = rng::stream(42, rng::STREAM_NOISE);
        let eps = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
        let inst = ProblemInstance::new(x, theta, eps, s_star).unwrap();
        let cfg = ChainConfig::new(Subset::from_indices(p, t_hat).unwrap(), 2.0, 1.0, 1.0, 0.5, 42)
            .unwrap()
            .with_d(d);
        (inst, cfg)
    }

    fn sub(p: usize, idx: &[usize]) -> Subset {
        Subset::from_indices(p, idx).unwrap()
    }

    #[test]
    fn g_map_cases() {
        let (inst, cfg) = setup(6, 20, &[1], &[1], 1, 4.0);
        assert_eq!(g_map(sub(6, &[1, 4]), &inst, &cfg).unwrap(), sub(6, &[1]));
        assert_eq!(g_map(sub(6, &[1, 2, 4]), &inst, &cfg).unwrap(), sub(6, &[1, 4]));
        assert_eq!(g_map(sub(6, &[0, 2, 3, 4]), &inst, &cfg).unwrap(), sub(6, &[1]));
        assert_eq!(g_map(sub(6, &[0, 2]), &inst, &cfg).unwrap(), sub(6, &[0, 1, 2]));
        assert!(matches!(g_map(sub(6, &[1]), &inst, &cfg), Err(Error::RootHasNoParent)));
    }

    #[test]
    fn g_map_adds_best_projection() {
        let (inst, cfg) = setup(6, 20, &[1, 3], &[1, 3], 2, 4.0);
        let s = sub(6, &[0]);
        let g = g_map(s, &inst, &cfg).unwrap();
        let val = |t: Subset| {
            ProjectionState::from_subset(inst.x(), t)
                .unwrap()
                .project_sq_norm(inst.mean())
                .unwrap()
        };
        let want = if val(s.with(1)) >= val(s.with(3)) {
            s.with(1)
        } else {
            s.with(3)
        };
        assert_eq!(g, want);
    }

    #[test]
    fn g_map_ties_go_to_smallest_index() {
        // orthogonal columns, equal coefficients: both candidates tie
        let x = DMatrix::from_row_slice(4, 3, &[1., 1., 1., 1., -1., 1., 1., 1., -1., 1., -1., -1.]);
        let theta = DVector::from_column_slice(&[0.0, 1.0, 1.0]);
        let inst = ProblemInstance::new(x, theta, DVector::zeros(4), 2).unwrap();
        let cfg = ChainConfig::new(sub(3, &[1, 2]), 2.0, 1.0, 1.0, 1.0, 0).unwrap();
        assert_eq!(g_map(sub(3, &[0]), &inst, &cfg).unwrap(), sub(3, &[0, 1]));
    }

    #[test]
    fn small_tree_by_hand() {
        // p = 3, T = T-hat = {1}, s* = 1: every state other than T lies in U
        let (inst, cfg) = setup(3, 10, &[1], &[1], 1, 2.0);
        let tree = build_tree(&inst, &cfg).unwrap();
        let d = |idx: &[usize]| tree.depth(sub(3, idx));
        assert_eq!(d(&[1]), 0);
        assert_eq!(d(&[0, 1]), 1);
        assert_eq!(d(&[1, 2]), 1);
        assert_eq!(d(&[]), 1);
        assert_eq!(d(&[0]), 2);
        assert_eq!(d(&[2]), 2);
        assert_eq!(d(&[0, 1, 2]), 2);
        assert_eq!(d(&[0, 2]), 3);
        assert_eq!(tree.edge_count(), 7);
        assert_eq!(tree.parent(sub(3, &[])), Some(sub(3, &[1])));
    }

    #[test]
    fn outside_u_attaches_to_t_hat() {
        let (inst, cfg) = setup(6, 20, &[2], &[2, 5], 1, 4.0);
        let tree = build_tree(&inst, &cfg).unwrap();
        let reg = Regions::new(&inst, &cfg);
        for s in tree.states() {
            if s != reg.t && !reg.in_u(s) {
                assert_eq!(tree.parent(s), Some(cfg.t_hat));
                assert_eq!(lambda_set(s, &tree), vec![s]);
            }
        }
        let lam = lambda_set(cfg.t_hat, &tree);
        assert!(tree
            .states()
            .filter(|s| *s != reg.t && !reg.in_u(*s))
            .all(|s| lam.contains(&s)));
        assert_eq!(lambda_set(reg.t, &tree).len(), 64);
    }

    #[test]
    fn cycle_is_reported() {
        // T-hat outside U maps to itself
        let (inst, cfg) = setup(6, 20, &[0], &[1, 2, 3, 4], 1, 4.0);
        assert!(matches!(build_tree(&inst, &cfg), Err(Error::CycleDetected(s)) if s.size() == 4));
    }

    #[test]
    fn paths_and_lengths() {
        let (inst, cfg) = setup(6, 20, &[1, 3], &[1, 3], 2, 4.0);
        let tree = build_tree(&inst, &cfg).unwrap();
        let kernel = ProposalKernel::for_instance(&inst, &cfg).unwrap();
        let mut diam = 0;
        for i in tree.states() {
            for f in tree.states() {
                if i == f {
                    continue;
                }
                let path = canonical_path(i, f, &tree);
                assert_eq!(path[0], i);
                assert_eq!(*path.last().unwrap(), f);
                assert_eq!(path.len() - 1, tree.distance(i, f));
                for w in path.windows(2) {
                    assert!(kernel.prob(w[0], w[1]) > 0.0 && kernel.prob(w[1], w[0]) > 0.0);
                }
                diam = diam.max(path.len() - 1);
            }
        }
        assert_eq!(max_path_length(&tree), diam);
        assert!(diam <= 2 + 8 * 2);
        let s = sub(6, &[0, 1, 3]);
        assert_eq!(canonical_path(s, tree.parent(s).unwrap(), &tree).len(), 2);
    }

    #[test]
    fn structure_checks_pass() {
        let (inst, cfg) = setup(7, 24, &[1, 3], &[1, 3, 5], 2, 4.0);
        let tree = build_tree(&inst, &cfg).unwrap();
        for fam in check_tree_structure(&inst, &cfg, &tree) {
            assert!(fam.holds(), "{}: {:?}", fam.name, fam.violations);
        }
    }

    #[test]
    fn exact_loadings_match_lambda_formula() {
        let (inst, cfg) = setup(6, 20, &[2], &[2, 4], 1, 1.0);
        let post = exact_distribution(&inst, &cfg).unwrap();
        let tree = build_tree(&inst, &cfg).unwrap();
        let loads = edge_loadings(&inst, &cfg, &tree, &post, true).unwrap();
        assert_eq!(loads.len(), 2 * 63);
        for e in &loads {
            let ex = e.rho_exact.unwrap();
            assert!(ex <= e.rho_bound * (1.0 + 1e-9), "{ex} > {}", e.rho_bound);
            assert!((ex - e.rho_bound).abs() <= 1e-9 * e.rho_bound);
        }
    }

    #[test]
    fn loading_by_direct_pair_sum() {
        let (inst, cfg) = setup(4, 12, &[0], &[0], 1, 0.5);
        let post = exact_distribution(&inst, &cfg).unwrap();
        let tree = build_tree(&inst, &cfg).unwrap();
        let loads = edge_loadings(&inst, &cfg, &tree, &post, true).unwrap();
        for e in &loads {
            let mut sum = 0.0;
            for i in tree.states() {
                for f in tree.states() {
                    if i != f
                        && canonical_path(i, f, &tree)
                            .windows(2)
                            .any(|w| w[0] == e.from && w[1] == e.to)
                    {
                        sum += post.prob(i) * post.prob(f);
                    }
                }
            }
            assert!((sum / e.q - e.rho_exact.unwrap()).abs() <= 1e-10 * (sum / e.q));
        }
    }

    #[test]
    fn two_state_toy() {
        // p = 1, s* = 1: states {} and {0}, one tree edge
        let x = DMatrix::from_element(4, 1, 1.0);
        let theta = DVector::from_element(1, 0.7);
        let eps = DVector::from_column_slice(&[0.1, -0.3, 0.2, 0.0]);
        let inst = ProblemInstance::new(x, theta, eps, 1).unwrap();
        let cfg = ChainConfig::new(sub(1, &[0]), 2.0, 1.0, 1.0, 1.0, 0).unwrap();
        let post = exact_distribution(&inst, &cfg).unwrap();
        let tree = build_tree(&inst, &cfg).unwrap();
        let loads = edge_loadings(&inst, &cfg, &tree, &post, true).unwrap();
        let (a, b) = (post.prob(sub(1, &[])), post.prob(sub(1, &[0])));
        assert_eq!(loads.len(), 2);
        for e in &loads {
            assert!((e.rho_exact.unwrap() - a * b / e.q).abs() < 1e-12 * e.rho_exact.unwrap());
        }
        // two-state chain: gap = P(0,1) + P(1,0) = Q/a + Q/b
        let q = loads[0].q;
        let gap = q / a + q / b;
        let bound = sinclair_bound(&tree, &loads);
        assert!((bound - a * b / q).abs() < 1e-12 * bound);
        assert!(1.0 / gap <= bound);
    }

    #[test]
    fn lambda_masses_sum_to_one_at_root() {
        let (inst, cfg) = setup(5, 16, &[0, 3], &[0, 3], 2, 2.0);
        let post = exact_distribution(&inst, &cfg).unwrap();
        let tree = build_tree(&inst, &cfg).unwrap();
        let lam = log_lambda_masses(&tree, &post);
        assert!(lam[tree.root().bits() as usize].abs() < 1e-12);
        for s in tree.states() {
            let direct: f64 = lambda_set(s, &tree).iter().map(|x| post.prob(*x)).sum();
            assert!((lam[s.bits() as usize].exp() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn low_d_reports_ratio_failures() {
        let (inst, cfg) = setup(6, 20, &[2], &[2], 1, 0.05);
        let post = exact_distribution(&inst, &cfg).unwrap();
        let tree = build_tree(&inst, &cfg).unwrap();
        let fams = check_ratio_bounds(&inst, &cfg, &tree, &post);
        assert!(fams.iter().any(|f| !f.holds()));
        for f in &fams {
            for v in &f.violations {
                assert!(v.measured.is_finite() && v.threshold.is_finite());
            }
        }
    }

    #[test]
    fn dot_export_lists_every_edge() {
        let (inst, cfg) = setup(3, 10, &[1], &[1], 1, 2.0);
        let tree = build_tree(&inst, &cfg).unwrap();
        let mut buf = Vec::new();
        tree.write_dot(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches(" -> ").count(), 7);
        assert!(text.contains("rank=same"));
        assert!(text.starts_with("digraph"));
    }
}
