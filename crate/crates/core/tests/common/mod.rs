//! Master-equation reference for the dot: occupation probabilities of the
//! four states, optionally tagged with whether an X photon has been emitted,
//! integrated with fixed-step RK4.
#![allow(dead_code)]

use speds_core::qd::{DriveProgram, QDModel, SweepOut};

pub const EMPTY: usize = 0;
pub const X: usize = 1;
pub const X2: usize = 2;
pub const SHELVED: usize = 3;

/// Generator as a list of `(from, to, rate)` over `n` states.
pub struct Chain {
    pub n: usize,
    pub rates: Vec<(usize, usize, f64)>,
}

impl Chain {
    fn derivative(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &(i, j, r) in &self.rates {
            let flow = r * p[i];
            out[i] -= flow;
            out[j] += flow;
        }
    }

    pub fn evolve(&self, p: &mut [f64], duration: f64, max_step: f64) {
        if duration <= 0.0 {
            return;
        }
        let steps = (duration / max_step).ceil() as usize;
        let h = duration / steps as f64;
        let n = self.n;
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..steps {
            self.derivative(p, &mut k1);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * h * k1[i];
            }
            self.derivative(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * h * k2[i];
            }
            self.derivative(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = p[i] + h * k3[i];
            }
            self.derivative(&tmp, &mut k4);
            for i in 0..n {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

/// Eight-state chain: index `state + 4 * flag`, where the flag is raised by
/// every X emission and never lowered.
pub fn tagged_chain(m: &QDModel, sweep_out: SweepOut, injecting: bool, sweeping: bool) -> Chain {
    let capture = if injecting { m.capture_rate } else { 0.0 };
    let removal = if sweeping { m.sweep_rate } else { 0.0 };
    let p = if sweep_out == SweepOut::FullReset {
        0.0
    } else {
        m.shelve_probability
    };
    let (gx, gx2) = (1.0 / m.tau_x_ns, 1.0 / m.tau_x2_ns);
    let mut rates = Vec::new();
    for f in 0..2 {
        let s = |state: usize| state + 4 * f;
        rates.push((s(EMPTY), s(X), capture));
        rates.push((s(X), s(X2), capture));
        rates.push((s(X), EMPTY + 4, gx * (1.0 - p)));
        rates.push((s(X), SHELVED + 4, gx * p));
        rates.push((s(X2), s(X), gx2));
        for from in [X, X2] {
            rates.push((s(from), s(EMPTY), removal * (1.0 - p)));
            rates.push((s(from), s(SHELVED), removal * p));
        }
        let reset = if sweep_out == SweepOut::FullReset { removal } else { 0.0 };
        rates.push((s(SHELVED), s(EMPTY), m.unshelve_rate + reset));
    }
    rates.retain(|r| r.2 > 0.0);
    Chain { n: 8, rates }
}

pub fn untag(p: &[f64]) -> [f64; 4] {
    [p[0] + p[4], p[1] + p[5], p[2] + p[6], p[3] + p[7]]
}

pub fn tag_mass(p: &[f64]) -> f64 {
    p[4..].iter().sum()
}

/// Probabilities over one pulsed drive period, with the tag cleared at the start.
pub fn one_period(m: &QDModel, d: &DriveProgram, start: [f64; 4]) -> Vec<f64> {
    let period = d.period_ns();
    let pw = d.pulse_width_ps * 1e-3;
    let mut p = vec![0.0; 8];
    p[..4].copy_from_slice(&start);
    let step = 2e-3;
    tagged_chain(m, d.sweep_out, true, false).evolve(&mut p, pw, step);
    if d.sweep_out == SweepOut::None {
        tagged_chain(m, d.sweep_out, false, false).evolve(&mut p, period - pw, step);
    } else {
        tagged_chain(m, d.sweep_out, false, false).evolve(&mut p, d.sweep_delay_ns, step);
        tagged_chain(m, d.sweep_out, false, true).evolve(&mut p, period - pw - d.sweep_delay_ns, step);
    }
    p
}

/// Dot state at the start of a period in the periodic steady state.
pub fn periodic_start(m: &QDModel, d: &DriveProgram) -> [f64; 4] {
    let mut s = [1.0, 0.0, 0.0, 0.0];
    for _ in 0..2000 {
        let next = untag(&one_period(m, d, s));
        let change: f64 = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
        s = next;
        if change < 1e-13 {
            break;
        }
    }
    s
}

/// Normalized peak areas `P(emit in 0 and in m) / P(emit)^2` for `m = 1..=m_max`,
/// valid when a period holds at most one X photon.
pub fn markov_peak_areas(m: &QDModel, d: &DriveProgram, m_max: usize) -> Vec<f64> {
    let start = periodic_start(m, d);
    let first = one_period(m, d, start);
    let p_emit = tag_mass(&first);
    // dot state at the end of an emitting period, unnormalized
    let mut cond = [first[4], first[5], first[6], first[7]];
    let mut out = Vec::new();
    for _ in 0..m_max {
        let next = one_period(m, d, cond);
        out.push(tag_mass(&next) / (p_emit * p_emit));
        cond = untag(&next);
    }
    out
}

/// DC: probability that the first X photon after `t0 = 0` arrives by each of
/// `times`, starting from the state right after an X emission.
pub fn dc_waiting_cdf(m: &QDModel, times: &[f64]) -> Vec<f64> {
    let chain = tagged_chain(m, SweepOut::None, true, false);
    let mut p = vec![0.0; 8];
    p[EMPTY] = 1.0 - m.shelve_probability;
    p[SHELVED] = m.shelve_probability;
    let mut t = 0.0;
    times
        .iter()
        .map(|&next| {
            chain.evolve(&mut p, next - t, 1e-3);
            t = next;
            tag_mass(&p)
        })
        .collect()
}

/// DC steady state.
pub fn dc_steady_state(m: &QDModel) -> [f64; 4] {
    let chain = tagged_chain(m, SweepOut::None, true, false);
    let mut p = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    chain.evolve(&mut p, 400.0, 2e-3);
    untag(&p)
}

/// DC auto-correlation of the X line, `g2(τ) = P_X(τ | just emitted) / P_X`,
/// averaged over `[lo, hi)` by the midpoint rule.
pub fn dc_x_g2(m: &QDModel, lo: f64, hi: f64) -> f64 {
    let chain = tagged_chain(m, SweepOut::None, true, false);
    let ss = dc_steady_state(m)[X];
    let mut p = vec![0.0; 8];
    p[EMPTY] = 1.0 - m.shelve_probability;
    p[SHELVED] = m.shelve_probability;
    let n = 20;
    let h = (hi - lo) / n as f64;
    chain.evolve(&mut p, lo + 0.5 * h, 1e-3);
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            chain.evolve(&mut p, h, 1e-3);
        }
        acc += untag(&p)[X];
    }
    acc / n as f64 / ss
}
