use super::{AudioError, Signal};
use crate::fft::cross_correlation;
use crate::Real;

/// Result of [`align`]: the detected lag and the two signals trimmed to
/// their common support.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment<T> {
    /// Positive when `test` lags behind `reference`.
    pub lag: isize,
    pub reference: Signal<T>,
    pub test: Signal<T>,
}

// Ceiling on how many near-maximal lags get re-scored exactly.
const MAX_CANDIDATES: usize = 64;

/// Delay-compensates `test` against `reference`.
///
/// The lag maximises normalised cross-correlation within `±max_lag`
/// seconds. FFT correlation shortlists lags; the shortlist is re-scored by
/// direct summation so ties (identical or periodic inputs) resolve
/// deterministically towards the smallest `|lag|`.
pub fn align<T: Real>(
    reference: &Signal<T>,
    test: &Signal<T>,
    max_lag: f64,
) -> Result<Alignment<T>, AudioError> {
    reference.check_rate(test)?;
    if !(max_lag >= 0.0) || !max_lag.is_finite() {
        return Err(AudioError::InvalidArgument(format!("max_lag {max_lag}")));
    }
    if reference.is_empty() || test.is_empty() {
        return Err(AudioError::EmptyOverlap(0));
    }
    let r = reference.samples();
    let t = test.samples();
    let limit = (max_lag * f64::from(reference.sample_rate())).round() as isize;
    let lo = (-limit).max(-(r.len() as isize - 1));
    let hi = limit.min(t.len() as isize - 1);

    let lag = if lo == hi || limit == 0 {
        0
    } else {
        best_lag(r, t, lo, hi)
    };
    trim(reference, test, lag)
}

fn overlap(r_len: usize, t_len: usize, lag: isize) -> (usize, usize, usize) {
    // (reference start, test start, common length)
    if lag >= 0 {
        let lag = lag as usize;
        (0, lag, r_len.min(t_len.saturating_sub(lag)))
    } else {
        let lead = (-lag) as usize;
        (lead, 0, r_len.saturating_sub(lead).min(t_len))
    }
}

fn best_lag<T: Real>(r: &[T], t: &[T], lo: isize, hi: isize) -> isize {
    let corr = cross_correlation(r, t);
    let offset = r.len() as isize - 1;

    let prefix = |x: &[T]| {
        let mut p = Vec::with_capacity(x.len() + 1);
        let mut acc = T::zero();
        p.push(acc);
        for &v in x {
            acc = acc + v * v;
            p.push(acc);
        }
        p
    };
    let pr = prefix(r);
    let pt = prefix(t);
    let fast_ncc = |lag: isize| -> T {
        let (rs, ts, n) = overlap(r.len(), t.len(), lag);
        let er = pr[rs + n] - pr[rs];
        let et = pt[ts + n] - pt[ts];
        let denom = (er * et).sqrt();
        if n == 0 || !(denom > T::zero()) {
            T::zero()
        } else {
            corr[(lag + offset) as usize] / denom
        }
    };

    let scores: Vec<(isize, T)> = (lo..=hi).map(|lag| (lag, fast_ncc(lag))).collect();
    let max = scores
        .iter()
        .map(|s| s.1)
        .fold(T::neg_infinity(), T::max);
    if !(max > T::zero()) {
        return 0;
    }
    let tol = T::epsilon().sqrt() * T::lit(10.0);
    let mut shortlist: Vec<isize> = scores
        .iter()
        .filter(|s| s.1 >= max - tol)
        .map(|s| s.0)
        .collect();
    shortlist.sort_by_key(|&lag| (lag.unsigned_abs(), -lag));
    shortlist.truncate(MAX_CANDIDATES);

    // Exact scores within rounding of the best count as ties; the
    // shortlist is already ordered by |lag|.
    let exact: Vec<T> = shortlist.iter().map(|&lag| exact_ncc(r, t, lag)).collect();
    let top = exact.iter().copied().fold(T::neg_infinity(), T::max);
    let slack = T::epsilon() * T::lit(1024.0);
    let pick = exact.iter().position(|&v| v >= top - slack).expect("non-empty shortlist");
    shortlist[pick]
}

fn exact_ncc<T: Real>(r: &[T], t: &[T], lag: isize) -> T {
    let (rs, ts, n) = overlap(r.len(), t.len(), lag);
    let a = &r[rs..rs + n];
    let b = &t[ts..ts + n];
    let mut dot = T::zero();
    let mut ea = T::zero();
    let mut eb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        ea = ea + x * x;
        eb = eb + y * y;
    }
    let denom = (ea * eb).sqrt();
    if denom > T::zero() {
        dot / denom
    } else {
        T::zero()
    }
}

fn trim<T: Real>(
    reference: &Signal<T>,
    test: &Signal<T>,
    lag: isize,
) -> Result<Alignment<T>, AudioError> {
    let (rs, ts, n) = overlap(reference.len(), test.len(), lag);
    if n == 0 {
        return Err(AudioError::EmptyOverlap(lag));
    }
    Ok(Alignment {
        lag,
        reference: reference.slice(rs, rs + n),
        test: test.slice(ts, ts + n),
    })
}
