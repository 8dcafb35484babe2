//! Inner loops for the event sums behind every likelihood evaluation.
//!
//! A log-likelihood at one candidate position scans millions of event times,
//! so the per-event cost dominates the whole Monte Carlo budget. The sum of
//! `ln(1 + lambda(t_i - tau) / lambda0)` is computed as logs of running
//! products: factors are accumulated in four interleaved product lanes (the
//! factors are all >= 1 for a nonnegative signal amplitude) and one `ln` is
//! taken per 64-event block instead of per event.
//!
//! Determinism contract: lane assignment and block flushes are keyed to the
//! absolute event index, so evaluating one tau alone or inside a batch gives
//! bitwise identical results, independent of chunking and threading.

use crate::intensity::{pow_kappa, PowKind, Shape};

const LANES: usize = 4;
const BLOCK: usize = 64;
/// Per-event lane overflow guard; factors can be large when the noise floor
/// is tiny.
const LANE_FLUSH: f64 = 1e250;
/// Above this a product of four lanes could overflow, so flush lane by lane.
const COMBINE_GUARD: f64 = 1e70;

#[derive(Clone, Copy)]
struct LaneState {
    lanes: [f64; LANES],
    acc: f64,
}

impl LaneState {
    fn new() -> Self {
        Self {
            lanes: [1.0; LANES],
            acc: 0.0,
        }
    }

    #[inline(always)]
    fn flush(&mut self) {
        let l = &mut self.lanes;
        if l.iter().any(|&x| x > COMBINE_GUARD) {
            self.acc += l[0].ln() + l[1].ln() + l[2].ln() + l[3].ln();
        } else {
            let p = (l[0] * l[1]) * (l[2] * l[3]);
            if p != 1.0 {
                self.acc += p.ln();
            }
        }
        *l = [1.0; LANES];
    }

    fn finish(mut self) -> f64 {
        self.flush();
        self.acc
    }
}

/// Processes events at absolute indices `[from, to)` for one tau, flushing at
/// absolute block boundaries. `factor(s)` must be `>= 1`.
#[inline(always)]
fn accumulate_range<F: Fn(f64) -> f64>(
    events: &[f64],
    from: usize,
    to: usize,
    tau: f64,
    factor: &F,
    st: &mut LaneState,
) {
    let mut i = from;
    while i < to {
        // run until the next absolute block boundary or the end of the range
        let stop = ((i / BLOCK) + 1) * BLOCK;
        let stop = stop.min(to);
        let mut q = i;
        // head: align to a multiple of LANES inside the block
        while q < stop && q % LANES != 0 {
            lane_mul(st, q, factor(events[q] - tau));
            q += 1;
        }
        // body: four independent product chains
        while q + LANES <= stop {
            let f0 = factor(events[q] - tau);
            let f1 = factor(events[q + 1] - tau);
            let f2 = factor(events[q + 2] - tau);
            let f3 = factor(events[q + 3] - tau);
            st.lanes[0] *= f0;
            st.lanes[1] *= f1;
            st.lanes[2] *= f2;
            st.lanes[3] *= f3;
            if st.lanes[0] > LANE_FLUSH
                || st.lanes[1] > LANE_FLUSH
                || st.lanes[2] > LANE_FLUSH
                || st.lanes[3] > LANE_FLUSH
            {
                for l in &mut st.lanes {
                    st.acc += l.ln();
                    *l = 1.0;
                }
            }
            q += LANES;
        }
        // tail of the block
        while q < stop {
            lane_mul(st, q, factor(events[q] - tau));
            q += 1;
        }
        i = stop;
        if i % BLOCK == 0 {
            st.flush();
        }
    }
}

#[inline(always)]
fn lane_mul(st: &mut LaneState, abs_idx: usize, f: f64) {
    let lane = abs_idx % LANES;
    st.lanes[lane] *= f;
    if st.lanes[lane] > LANE_FLUSH {
        st.acc += st.lanes[lane].ln();
        st.lanes[lane] = 1.0;
    }
}

/// Power-law event-sum kernel for one detector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PowerLawKernel {
    pub a: f64,
    pub kappa: f64,
    pub lambda0: f64,
    kind: PowKind,
    ratio: f64, // a / lambda0
}

impl PowerLawKernel {
    pub fn new(a: f64, kappa: f64, lambda0: f64) -> Self {
        Self {
            a,
            kappa,
            lambda0,
            kind: PowKind::of(kappa),
            ratio: a / lambda0,
        }
    }

    pub fn from_shape(shape: &Shape, lambda0: f64) -> Option<Self> {
        match shape {
            Shape::PowerLaw { a, kappa } => Some(Self::new(*a, *kappa, lambda0)),
            Shape::Tabulated(_) => None,
        }
    }

    /// `sum_{t_i > tau} ln(1 + lambda(t_i - tau) / lambda0)`.
    pub fn sum_log_ratio(&self, events: &[f64], tau: f64) -> f64 {
        let mut out = [0.0];
        self.sum_log_ratio_multi(events, &[tau], &mut out);
        out[0]
    }

    /// Batched version over many taus; `out[g]` is bitwise identical to
    /// `sum_log_ratio(events, taus[g])`.
    pub fn sum_log_ratio_multi(&self, events: &[f64], taus: &[f64], out: &mut [f64]) {
        assert_eq!(taus.len(), out.len());
        let r = self.ratio;
        match self.kind {
            PowKind::Zero => self.run_multi(events, taus, out, |s: f64| {
                if s >= 0.0 {
                    1.0 + r
                } else {
                    1.0
                }
            }),
            PowKind::Half => self.run_multi(events, taus, out, |s: f64| 1.0 + r * s.sqrt()),
            PowKind::One => self.run_multi(events, taus, out, |s: f64| 1.0 + r * s),
            PowKind::Two => self.run_multi(events, taus, out, |s: f64| 1.0 + r * (s * s)),
            PowKind::Int(k) => self.run_multi(events, taus, out, |s: f64| 1.0 + r * s.powi(k)),
            PowKind::General => {
                let kappa = self.kappa;
                self.run_multi(events, taus, out, |s: f64| 1.0 + r * s.powf(kappa))
            }
        }
    }

    #[inline(always)]
    fn run_multi<F: Fn(f64) -> f64>(&self, events: &[f64], taus: &[f64], out: &mut [f64], f: F) {
        let m = taus.len();
        let n_ev = events.len();
        let mut states = vec![LaneState::new(); m];
        let starts: Vec<usize> = taus
            .iter()
            .map(|&tau| events.partition_point(|&t| t <= tau))
            .collect();
        const CHUNK: usize = 4096;
        let first = starts.iter().copied().min().unwrap_or(n_ev);
        let mut c0 = first;
        while c0 < n_ev {
            let c1 = (c0 + CHUNK).min(n_ev);
            for g in 0..m {
                let lo = starts[g].max(c0);
                if lo < c1 {
                    accumulate_range(events, lo, c1, taus[g], &f, &mut states[g]);
                }
            }
            c0 = c1;
        }
        for (o, st) in out.iter_mut().zip(states.into_iter()) {
            *o = st.finish();
        }
    }

    /// One summand of [`PowerLawKernel::sum_ell`]:
    /// `lambda'(s) / (lambda(s) + lambda0)`. The incremental One-step
    /// process folds these terms in event order, which reproduces `sum_ell`
    /// bitwise.
    #[inline(always)]
    pub fn ell_term(&self, s: f64) -> f64 {
        let (a, l0) = (self.a, self.lambda0);
        match self.kind {
            // step shapes carry no derivative information
            PowKind::Zero => 0.0,
            PowKind::One => a / (a * s + l0),
            PowKind::Two => 2.0 * a * s / (a * (s * s) + l0),
            _ => {
                let w = pow_kappa(s, self.kappa, self.kind);
                a * self.kappa * w / (s * (a * w + l0))
            }
        }
    }

    /// `sum_{tau < t_i <= t_end} lambda'(s) / (lambda(s) + lambda0)` at
    /// `s = t_i - tau`. Plain left-to-right accumulation.
    pub fn sum_ell(&self, events: &[f64], tau: f64, t_end: f64) -> f64 {
        let start = events.partition_point(|&t| t <= tau);
        let stop = events.partition_point(|&t| t <= t_end);
        events[start..stop]
            .iter()
            .map(|&t| self.ell_term(t - tau))
            .sum()
    }
}

/// Fallback event sums for tabulated shapes; one `ln` per event.
pub(crate) fn sum_log_ratio_generic(events: &[f64], tau: f64, shape: &Shape, lambda0: f64) -> f64 {
    let start = events.partition_point(|&t| t <= tau);
    events[start..]
        .iter()
        .map(|&t| (1.0 + shape.value(t - tau) / lambda0).ln())
        .sum()
}

pub(crate) fn sum_ell_generic(
    events: &[f64],
    tau: f64,
    t_end: f64,
    shape: &Shape,
    lambda0: f64,
) -> f64 {
    let start = events.partition_point(|&t| t <= tau);
    let stop = events.partition_point(|&t| t <= t_end);
    events[start..stop]
        .iter()
        .map(|&t| {
            let s = t - tau;
            shape.derivative(s) / (shape.value(s) + lambda0)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_sum(events: &[f64], tau: f64, a: f64, kappa: f64, l0: f64) -> f64 {
        events
            .iter()
            .filter(|&&t| t > tau)
            .map(|&t| (1.0 + a * (t - tau).powf(kappa) / l0).ln())
            .sum()
    }

    fn fake_events(n: usize) -> Vec<f64> {
        // deterministic quasi-uniform times in [0, 6]
        let mut v: Vec<f64> = (0..n)
            .map(|i| 6.0 * ((i as f64 * 0.754877666) % 1.0))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn matches_naive_sum_for_each_exponent() {
        let events = fake_events(1000);
        for &kappa in &[0.0, 0.5, 1.0, 2.0, 3.0, 1.7] {
            let k = PowerLawKernel::new(2.5, kappa, 0.7);
            for &tau in &[0.0, 1.3, 5.9, 6.5] {
                let got = k.sum_log_ratio(&events, tau);
                let want = naive_sum(&events, tau, 2.5, kappa, 0.7);
                assert!(
                    (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                    "kappa {kappa} tau {tau}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn multi_is_bitwise_equal_to_single() {
        let events = fake_events(5000);
        let k = PowerLawKernel::new(3.0, 2.0, 1.0);
        let taus: Vec<f64> = (0..37).map(|i| 0.11 + i as f64 * 0.16).collect();
        let mut out = vec![0.0; taus.len()];
        k.sum_log_ratio_multi(&events, &taus, &mut out);
        for (i, &tau) in taus.iter().enumerate() {
            let single = k.sum_log_ratio(&events, tau);
            assert_eq!(out[i].to_bits(), single.to_bits(), "tau index {i}");
        }
    }

    #[test]
    fn huge_factors_do_not_overflow() {
        let events = fake_events(10_000);
        // tiny noise floor so each factor is ~1e12
        let k = PowerLawKernel::new(1e6, 2.0, 1e-6);
        let got = k.sum_log_ratio(&events, 0.5);
        let want = naive_sum(&events, 0.5, 1e6, 2.0, 1e-6);
        assert!(got.is_finite());
        assert!((got - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn ell_sum_matches_generic_path() {
        let events = fake_events(2000);
        let shape = Shape::PowerLaw { a: 3.0, kappa: 2.0 };
        let k = PowerLawKernel::new(3.0, 2.0, 1.0);
        for &(tau, t_end) in &[(0.4, 6.0), (1.0, 3.5), (5.0, 5.0)] {
            let got = k.sum_ell(&events, tau, t_end);
            let want = sum_ell_generic(&events, tau, t_end, &shape, 1.0);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn events_at_tau_are_excluded() {
        let events = vec![1.0, 2.0, 3.0];
        let k = PowerLawKernel::new(1.0, 2.0, 1.0);
        // tau exactly on an event: that event contributes nothing
        let at = k.sum_log_ratio(&events, 2.0);
        let want = (1.0f64 + 1.0).ln(); // only t=3, s=1
        assert!((at - want).abs() < 1e-15);
        assert_eq!(k.sum_ell(&events, 3.0, 6.0), 0.0);
    }
}
