//! Soft-boundary proposal kernel and the Metropolis-Hastings sampler.
//!
//! Proposal rules, with CORE = {|S| <= 3 s*}:
//!
//! * from S in CORE other than T-hat: a uniform single flip;
//! * from S outside CORE: jump to T-hat with probability 1/2, otherwise a
//!   uniform single flip;
//! * from T-hat: a single flip with probability 1/2, otherwise pick k
//!   uniformly from 3s*+1..=p and jump to a uniform set of size k.
//!
//! Probabilities add when two rules reach the same state (T-hat a neighbor
//! of S, or a big-jump target adjacent to T-hat). When 3s* >= p there are no
//! big-jump sizes and T-hat proposes single flips only.

use std::io::Write;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{ChainConfig, ProblemInstance};
use crate::posterior::{log_ratio, log_weight_from_state, penalty, LogWeight};
use crate::projection::ProjectionState;
use crate::rng::{self, StreamRng};
use crate::subset::{binomial, Subset};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MoveKind {
    SingleFlip(usize),
    JumpToInit,
    /// Jump from T-hat to a uniform set of the given size.
    BigJump(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalMove {
    pub kind: MoveKind,
    pub target: Subset,
    /// log R(S, target).
    pub log_fwd: f64,
    /// log R(target, S).
    pub log_bwd: f64,
}

/// The proposal matrix R.
#[derive(Clone, Copy, Debug)]
pub struct ProposalKernel {
    p: usize,
    s_star: usize,
    t_hat: Subset,
}

impl ProposalKernel {
    pub fn new(p: usize, s_star: usize, t_hat: Subset) -> Result<Self> {
        if t_hat.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: t_hat.dim(),
            });
        }
        if s_star == 0 {
            return Err(Error::ConfigInvalid("s_star must be at least 1".into()));
        }
        Ok(ProposalKernel { p, s_star, t_hat })
    }

    pub fn for_instance(inst: &ProblemInstance, cfg: &ChainConfig) -> Result<Self> {
        Self::new(inst.p(), inst.s_star(), cfg.t_hat)
    }

    pub fn t_hat(&self) -> Subset {
        self.t_hat
    }

    pub fn in_core(&self, s: Subset) -> bool {
        s.size() <= 3 * self.s_star
    }

    /// Number of admissible big-jump sizes, p - 3s* (zero if negative).
    pub fn jump_sizes(&self) -> usize {
        self.p.saturating_sub(3 * self.s_star)
    }

    fn flip_prob(&self, s: Subset) -> f64 {
        let p = self.p as f64;
        if s == self.t_hat {
            if self.jump_sizes() == 0 {
                1.0 / p
            } else {
                0.5 / p
            }
        } else if self.in_core(s) {
            1.0 / p
        } else {
            0.5 / p
        }
    }

    /// R(s, s2).
    pub fn prob(&self, s: Subset, s2: Subset) -> f64 {
        let mut r = 0.0;
        if s.hamming(&s2) == 1 {
            r += self.flip_prob(s);
        }
        if s == self.t_hat {
            let k = s2.size();
            if k > 3 * self.s_star {
                r += 0.5 / self.jump_sizes() as f64 / binomial(self.p, k) as f64;
            }
        } else if !self.in_core(s) && s2 == self.t_hat {
            r += 0.5;
        }
        r
    }

    /// log R(s, s2), `-inf` when unreachable in one proposal.
    pub fn log_prob(&self, s: Subset, s2: Subset) -> f64 {
        self.prob(s, s2).ln()
    }

    /// States reachable from `s` in one proposal, with their probabilities.
    /// Repeated targets are merged; order is ascending by bit pattern.
    /// The T-hat row lists every large set, so this is for oracle-scale p.
    pub fn row(&self, s: Subset) -> Vec<(Subset, f64)> {
        assert!(self.p <= 24, "proposal rows are enumerated only for p <= 24");
        let mut targets: Vec<Subset> = s.neighbors();
        if s == self.t_hat {
            if self.jump_sizes() > 0 {
                // every set larger than 3 s*
                for b in 0..(1u64 << self.p) {
                    if b.count_ones() as usize > 3 * self.s_star {
                        targets.push(Subset::from_bits(self.p, b).expect("in range"));
                    }
                }
            }
        } else if !self.in_core(s) {
            targets.push(self.t_hat);
        }
        targets.sort();
        targets.dedup();
        targets.into_iter().map(|t| (t, self.prob(s, t))).collect()
    }

    /// Draw a proposal from `s`.
    pub fn propose<R: Rng + ?Sized>(&self, s: Subset, rng: &mut R) -> ProposalMove {
        let p = self.p;
        let kind = if s == self.t_hat {
            if self.jump_sizes() > 0 && rng.random_bool(0.5) {
                MoveKind::BigJump(3 * self.s_star + 1 + rng.random_range(0..self.jump_sizes()))
            } else {
                MoveKind::SingleFlip(rng.random_range(0..p))
            }
        } else if !self.in_core(s) && rng.random_bool(0.5) {
            MoveKind::JumpToInit
        } else {
            MoveKind::SingleFlip(rng.random_range(0..p))
        };
        let target = match kind {
            MoveKind::SingleFlip(j) => s.flip(j),
            MoveKind::JumpToInit => self.t_hat,
            MoveKind::BigJump(k) => {
                let idx: Vec<usize> = index::sample(rng, p, k).into_vec();
                Subset::from_indices(p, &idx).expect("in range")
            }
        };
        ProposalMove {
            kind,
            target,
            log_fwd: self.log_prob(s, target),
            log_bwd: self.log_prob(target, s),
        }
    }
}

/// log of the Metropolis-Hastings acceptance ratio.
fn log_acceptance(log_ratio: f64, mv: &ProposalMove) -> f64 {
    log_ratio + mv.log_bwd - mv.log_fwd
}

fn accept<R: Rng + ?Sized>(log_a: f64, rng: &mut R) -> bool {
    log_a >= 0.0 || rng.random::<f64>().ln() < log_a
}

/// One Metropolis-Hastings transition from `s`. With `lazy`, a fair coin
/// first decides whether to hold.
pub fn mh_step<R: Rng + ?Sized>(
    s: Subset,
    inst: &ProblemInstance,
    cfg: &ChainConfig,
    rng: &mut R,
    lazy: bool,
) -> Result<(Subset, bool)> {
    if lazy && rng.random_bool(0.5) {
        return Ok((s, false));
    }
    let kernel = ProposalKernel::for_instance(inst, cfg)?;
    let mv = kernel.propose(s, rng);
    let lr = log_ratio(s, mv.target, inst, cfg)?;
    if accept(log_acceptance(lr, &mv), rng) {
        Ok((mv.target, true))
    } else {
        Ok((s, false))
    }
}

/// A running chain that keeps the projection of its current state, so a
/// single-flip proposal costs one column update.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    inst: &'a ProblemInstance,
    cfg: &'a ChainConfig,
    kernel: ProposalKernel,
    state: ProjectionState<'a>,
    weight: LogWeight,
    rng: StreamRng,
}

impl<'a> Sampler<'a> {
    /// Chain started at T-hat, driven by the chain stream of `cfg.seed`.
    pub fn new(inst: &'a ProblemInstance, cfg: &'a ChainConfig) -> Result<Self> {
        Self::with_rng(inst, cfg, rng::stream(cfg.seed, rng::STREAM_CHAIN))
    }

    pub fn with_rng(inst: &'a ProblemInstance, cfg: &'a ChainConfig, rng: StreamRng) -> Result<Self> {
        let kernel = ProposalKernel::for_instance(inst, cfg)?;
        let state = ProjectionState::from_subset(inst.x(), cfg.t_hat)?;
        let weight = log_weight_from_state(&state, inst, cfg)?;
        Ok(Sampler {
            inst,
            cfg,
            kernel,
            state,
            weight,
            rng,
        })
    }

    pub fn current(&self) -> Subset {
        self.state.active()
    }

    pub fn log_weight(&self) -> LogWeight {
        self.weight
    }

    /// Move to `s` directly (no acceptance step).
    pub fn reset_to(&mut self, s: Subset) -> Result<()> {
        self.state = ProjectionState::from_subset(self.inst.x(), s)?;
        self.weight = log_weight_from_state(&self.state, self.inst, self.cfg)?;
        Ok(())
    }

    fn candidate(&self, target: Subset) -> Result<(ProjectionState<'a>, LogWeight)> {
        let cur = self.state.active();
        let mut next = if cur.hamming(&target) == 1 {
            self.state.clone()
        } else {
            ProjectionState::from_subset(self.inst.x(), target)?
        };
        if cur.hamming(&target) == 1 {
            let k = cur.symmetric_difference(&target).smallest().expect("differ");
            if target.contains(k) {
                let upd = next.add_column(k)?;
                let g = self.weight.g + upd.delta(self.inst.y()) / self.cfg.beta;
                let m = penalty(target.size(), next.rank(), self.inst, self.cfg);
                return Ok((next, LogWeight { g, m, log_w: g - m }));
            }
            next.remove_column(k)?;
        }
        let w = log_weight_from_state(&next, self.inst, self.cfg)?;
        Ok((next, w))
    }

    /// One transition; returns whether a proposal was accepted.
    pub fn step(&mut self, lazy: bool) -> Result<bool> {
        if lazy && self.rng.random_bool(0.5) {
            return Ok(false);
        }
        let cur = self.state.active();
        let mv = self.kernel.propose(cur, &mut self.rng);
        if mv.target == cur {
            return Ok(false);
        }
        let (next, w) = self.candidate(mv.target)?;
        let log_a = log_acceptance(w.log_w - self.weight.log_w, &mv);
        if accept(log_a, &mut self.rng) {
            self.state = next;
            self.weight = w;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub states: Vec<Subset>,
    pub accepts: Vec<bool>,
    pub log_weights: Vec<f64>,
    pub seed: u64,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Visit frequencies indexed by bit pattern (requires p <= 24).
    pub fn histogram(&self) -> Vec<f64> {
        let p = self.states[0].dim();
        assert!(p <= 24, "histogram needs an enumerable state space");
        let mut h = vec![0.0; 1 << p];
        for s in &self.states {
            h[s.bits() as usize] += 1.0;
        }
        let total = self.states.len() as f64;
        h.iter_mut().for_each(|v| *v /= total);
        h
    }

    /// CSV with columns `step,state_hex,accepted,log_w`. Row 0 is the
    /// starting state and is marked not accepted.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,state_hex,accepted,log_w")?;
        for (i, (s, lw)) in self.states.iter().zip(&self.log_weights).enumerate() {
            let acc = i > 0 && self.accepts[i - 1];
            writeln!(out, "{},{},{},{:.16e}", i, s.to_hex(), u8::from(acc), lw)?;
        }
        Ok(())
    }
}

/// Run `steps` transitions from T-hat. `accepts[i]` records the move from
/// `states[i]` to `states[i + 1]`.
pub fn run_chain(inst: &ProblemInstance, cfg: &ChainConfig, steps: usize, lazy: bool) -> Result<ChainTrace> {
    let mut sampler = Sampler::new(inst, cfg)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepts = Vec::with_capacity(steps);
    let mut log_weights = Vec::with_capacity(steps + 1);
    states.push(sampler.current());
    log_weights.push(sampler.log_weight().log_w);
    for _ in 0..steps {
        accepts.push(sampler.step(lazy)?);
        states.push(sampler.current());
        log_weights.push(sampler.log_weight().log_w);
    }
    Ok(ChainTrace {
        states,
        accepts,
        log_weights,
        seed: cfg.seed,
    })
}
