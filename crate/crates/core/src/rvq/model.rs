use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::kmeans::{kmeans, nearest};
use super::RvqError;
use crate::audio::Signal;
use crate::perturb::rng::derive_seed;
use crate::Real;

/// One stage's codebook: `entries` vectors of `dim` values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook<T> {
    pub(crate) dim: usize,
    pub(crate) data: Vec<T>,
}

impl<T: Real> Codebook<T> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn entry(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub frame_size: usize,
    pub stages: usize,
    pub entries: usize,
    pub seed: u64,
}

/// Trained RVQ codec.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub(crate) frame_size: usize,
    pub(crate) sample_rate: u32,
    pub(crate) window: Vec<T>,
    pub(crate) codebooks: Vec<Codebook<T>>,
    pub(crate) seed: u64,
    pub(crate) training_stats: Vec<f64>,
    pub(crate) id: String,
}

/// Codebook indices for one signal, frame-major (`frame_count * stages_used`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSequence {
    pub indices: Vec<u32>,
    pub frame_count: usize,
    pub stages_used: usize,
    /// Length of the signal before frame padding.
    pub sample_count: usize,
    pub model_id: String,
}

impl CodeSequence {
    pub fn frame(&self, f: usize) -> &[u32] {
        &self.indices[f * self.stages_used..(f + 1) * self.stages_used]
    }
}

/// `R = f_N * k * log2(C)` in exact arithmetic; `None` unless `C` is a
/// power of two.
pub fn code_bitrate(frame_rate: Ratio<u64>, stages: u64, entries: u64) -> Option<Ratio<u64>> {
    if !entries.is_power_of_two() || entries < 2 {
        return None;
    }
    Some(frame_rate * Ratio::from_integer(stages * u64::from(entries.trailing_zeros())))
}

/// Index into a reflect-padded block (mirror without repeating the edge).
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 || i < n {
        return i.min(n - 1);
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Completes a partial final frame by reflecting its own samples, so every
/// frame depends only on the samples it covers.
fn pad_frame<T: Real>(tail: &[T], frame_size: usize) -> Vec<T> {
    (0..frame_size).map(|i| tail[reflect(i, tail.len())]).collect()
}

/// Frames of `frame_size` samples, the final one completed by reflection.
fn frames<T: Real>(x: &[T], frame_size: usize) -> Vec<T> {
    let full = x.len() / frame_size * frame_size;
    let mut out = x[..full].to_vec();
    if full < x.len() {
        out.extend(pad_frame(&x[full..], frame_size));
    }
    out
}

// Bound on greedy/decode round trips while searching for a code cycle.
const MAX_PROJECTION_STEPS: usize = 256;

impl<T: Real> Model<T> {
    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn stages(&self) -> usize {
        self.codebooks.len()
    }

    pub fn entries(&self) -> usize {
        self.codebooks.first().map_or(0, Codebook::len)
    }

    pub fn codebooks(&self) -> &[Codebook<T>] {
        &self.codebooks
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean per-frame residual energy after each training stage.
    pub fn training_stats(&self) -> &[f64] {
        &self.training_stats
    }

    /// Content hash of the serialised model.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Frames per second, `f_N = f_s / frame_size`.
    pub fn frame_rate(&self) -> f64 {
        f64::from(self.sample_rate) / self.frame_size as f64
    }

    fn check_stages(&self, k: usize) -> Result<(), RvqError> {
        if k == 0 || k > self.stages() {
            return Err(RvqError::StageOutOfRange {
                k,
                max: self.stages(),
            });
        }
        Ok(())
    }

    /// Upper-bound bitrate in bits per second with `k` active stages.
    pub fn bitrate(&self, k: usize) -> Result<f64, RvqError> {
        self.check_stages(k)?;
        Ok(self.frame_rate() * k as f64 * (self.entries() as f64).log2())
    }

    /// [`Model::bitrate`] as an exact rational when `C` is a power of two.
    pub fn bitrate_exact(&self, k: usize) -> Result<Option<Ratio<u64>>, RvqError> {
        self.check_stages(k)?;
        let f_n = Ratio::new(u64::from(self.sample_rate), self.frame_size as u64);
        Ok(code_bitrate(f_n, k as u64, self.entries() as u64))
    }

    fn check_input(&self, w: &Signal<T>, k: usize) -> Result<(), RvqError> {
        if w.sample_rate() != self.sample_rate {
            return Err(RvqError::RateMismatch(self.sample_rate, w.sample_rate()));
        }
        self.check_stages(k)?;
        if w.is_empty() {
            return Err(RvqError::InvalidArgument("empty signal".into()));
        }
        Ok(())
    }

    fn sequence(&self, indices: Vec<u32>, w: &Signal<T>, k: usize) -> CodeSequence {
        CodeSequence {
            frame_count: indices.len() / k,
            indices,
            stages_used: k,
            sample_count: w.len(),
            model_id: self.id.clone(),
        }
    }

    fn greedy_frame(&self, frame: &[T], k: usize) -> Vec<u32> {
        let mut residual: Vec<T> = frame.iter().zip(&self.window).map(|(&x, &win)| x * win).collect();
        let mut codes = Vec::with_capacity(k);
        for book in &self.codebooks[..k] {
            let (j, _) = nearest(&book.data, self.frame_size, &residual);
            for (r, &c) in residual.iter_mut().zip(book.entry(j)) {
                *r = *r - c;
            }
            codes.push(j as u32);
        }
        codes
    }

    fn decode_frame(&self, codes: &[u32]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.frame_size];
        for (book, &j) in self.codebooks.iter().zip(codes) {
            for (a, &v) in acc.iter_mut().zip(book.entry(j as usize)) {
                *a = *a + v;
            }
        }
        acc.iter().zip(&self.window).map(|(&a, &win)| a / win).collect()
    }

    /// Per-frame greedy nearest-neighbour search through `k` stages.
    /// Not a projection in general: re-encoding the decoded signal can pick
    /// different entries. [`Model::encode`] builds on it.
    pub fn encode_greedy(&self, w: &Signal<T>, k: usize) -> Result<CodeSequence, RvqError> {
        self.check_input(w, k)?;
        let framed = frames(w.samples(), self.frame_size);
        let indices = framed
            .par_chunks(self.frame_size)
            .flat_map_iter(|f| self.greedy_frame(f, k))
            .collect();
        Ok(self.sequence(indices, w, k))
    }

    /// Quantises every frame through `k` stages.
    ///
    /// The result is a fixed point of decode-then-encode, so
    /// `encode(decode(encode(x)))` reproduces `encode(x)`. Per frame, the
    /// greedy code is fed back through decode and greedy search until the
    /// codes repeat; the member of that cycle closest to the input is kept.
    /// From the second stage on, the `k - 1` stage code extended by the
    /// zero entry also competes, which makes the frame's residual energy
    /// non-increasing in `k`. Ties go to the lexicographically smallest code.
    pub fn encode(&self, w: &Signal<T>, k: usize) -> Result<CodeSequence, RvqError> {
        self.check_input(w, k)?;
        let d = self.frame_size;
        let x = w.samples();
        let indices = (0..x.len().div_ceil(d))
            .into_par_iter()
            .flat_map_iter(|f| {
                let end = ((f + 1) * d).min(x.len());
                self.project_frame(&x[f * d..end], k)
            })
            .collect();
        Ok(self.sequence(indices, w, k))
    }

    fn project_frame(&self, visible: &[T], k: usize) -> Vec<u32> {
        let d = self.frame_size;
        let frame = pad_frame(visible, d);
        let error = |codes: &[u32]| -> T {
            let y = self.decode_frame(codes);
            visible.iter().zip(&y).map(|(&a, &b)| (a - b) * (a - b)).sum()
        };
        let mut chosen: Vec<u32> = Vec::new();
        for stages in 1..=k {
            let mut visited: Vec<Vec<u32>> = Vec::new();
            let mut codes = self.greedy_frame(&frame, stages);
            let cycle_start = loop {
                if let Some(pos) = visited.iter().position(|v| *v == codes) {
                    break pos;
                }
                if visited.len() == MAX_PROJECTION_STEPS {
                    log::warn!("rvq: no code cycle within {MAX_PROJECTION_STEPS} steps");
                    break 0;
                }
                let decoded = self.decode_frame(&codes);
                let next = self.greedy_frame(&pad_frame(&decoded[..visible.len()], d), stages);
                visited.push(std::mem::replace(&mut codes, next));
            };
            let mut candidates = visited.split_off(cycle_start);
            if stages > 1 {
                chosen.push(0);
                candidates.push(chosen);
            }
            chosen = candidates
                .into_iter()
                .map(|c| (error(&c), c))
                .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then_with(|| a.1.cmp(&b.1)))
                .expect("at least one candidate")
                .1;
        }
        chosen
    }

    /// Squared error between `w` and its reconstruction, per frame, over
    /// the samples each frame actually covers.
    pub fn frame_errors(&self, w: &Signal<T>, codes: &CodeSequence) -> Result<Vec<T>, RvqError> {
        let y = self.decode(codes)?;
        if y.len() != w.len() {
            return Err(RvqError::InvalidArgument("codes do not match the signal length".into()));
        }
        Ok(w.samples()
            .chunks(self.frame_size)
            .zip(y.samples().chunks(self.frame_size))
            .map(|(a, b)| a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum())
            .collect())
    }

    pub fn decode(&self, codes: &CodeSequence) -> Result<Signal<T>, RvqError> {
        if codes.model_id != self.id {
            return Err(RvqError::ModelMismatch {
                codes: codes.model_id.clone(),
                model: self.id.clone(),
            });
        }
        self.check_stages(codes.stages_used)?;
        let d = self.frame_size;
        let c = self.entries();
        if codes.indices.len() != codes.frame_count * codes.stages_used
            || codes.indices.iter().any(|&i| i as usize >= c)
            || codes.sample_count > codes.frame_count * d
        {
            return Err(RvqError::InvalidArgument("malformed code sequence".into()));
        }
        let mut out = Vec::with_capacity(codes.frame_count * d);
        for f in 0..codes.frame_count {
            out.extend(self.decode_frame(codes.frame(f)));
        }
        out.truncate(codes.sample_count);
        Signal::new(out, self.sample_rate).map_err(|e| RvqError::InvalidArgument(e.to_string()))
    }

    pub(crate) fn assemble(
        frame_size: usize,
        sample_rate: u32,
        window: Vec<T>,
        codebooks: Vec<Codebook<T>>,
        seed: u64,
        training_stats: Vec<f64>,
    ) -> Self {
        let mut model = Self {
            frame_size,
            sample_rate,
            window,
            codebooks,
            seed,
            training_stats,
            id: String::new(),
        };
        model.id = model.content_id();
        model
    }
}

/// Trains a model on `corpus`.
///
/// Latents are rectangular-windowed frames. Stage 1 runs plain k-means
/// with `C` free centroids. Later stages pin entry 0 to the zero vector so a
/// stage can never increase a frame's residual energy, and fit the other
/// `C - 1` entries.
pub fn train<T: Real>(corpus: &[Signal<T>], cfg: &TrainConfig) -> Result<Model<T>, RvqError> {
    let TrainConfig {
        frame_size: d,
        stages,
        entries,
        seed,
    } = *cfg;
    if d == 0 || stages == 0 || entries < 2 {
        return Err(RvqError::InvalidArgument(format!(
            "need frame_size >= 1, stages >= 1, entries >= 2 (got {d}, {stages}, {entries})"
        )));
    }
    if entries > u32::MAX as usize {
        return Err(RvqError::InvalidArgument("too many entries".into()));
    }
    let rate = corpus
        .first()
        .map(Signal::sample_rate)
        .ok_or(RvqError::InsufficientData {
            frames: 0,
            needed: 10 * entries,
        })?;
    if let Some(w) = corpus.iter().find(|w| w.sample_rate() != rate) {
        return Err(RvqError::RateMismatch(rate, w.sample_rate()));
    }
    let window = vec![T::one(); d];
    let mut residuals: Vec<T> = corpus
        .iter()
        .filter(|w| !w.is_empty())
        .flat_map(|w| frames(w.samples(), d))
        .collect();
    let n = residuals.len() / d;
    if n < 10 * entries {
        return Err(RvqError::InsufficientData {
            frames: n,
            needed: 10 * entries,
        });
    }
    let first = &residuals[..d];
    if residuals.chunks_exact(d).all(|f| f == first) {
        return Err(RvqError::DegenerateCorpus(entries));
    }

    let mut codebooks = Vec::with_capacity(stages);
    let mut stats = Vec::with_capacity(stages);
    for s in 0..stages {
        let fit = kmeans(&residuals, d, entries, s > 0, derive_seed(seed, s as u64));
        let book = Codebook {
            dim: d,
            data: fit.centroids,
        };
        let mut total = 0.0;
        for r in residuals.chunks_exact_mut(d) {
            let (j, _) = nearest(&book.data, d, r);
            for (v, &c) in r.iter_mut().zip(book.entry(j)) {
                *v = *v - c;
            }
            total += r.iter().map(|&v| (v * v).as_f64()).sum::<f64>();
        }
        log::debug!("rvq stage {} residual energy {:.6e}", s + 1, total / n as f64);
        stats.push(total / n as f64);
        codebooks.push(book);
    }
    Ok(Model::assemble(d, rate, window, codebooks, seed, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::gen_white_noise;
    use crate::perturb::rng::CounterRng;

    fn cfg(frame_size: usize, stages: usize, entries: usize) -> TrainConfig {
        TrainConfig {
            frame_size,
            stages,
            entries,
            seed: 17,
        }
    }

    #[test]
    fn reflect_padding() {
        assert_eq!(frames(&[1.0f64, 2.0, 3.0, 4.0, 5.0], 4), vec![1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0]);
        assert_eq!(frames(&[1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 4), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 6.0]);
        assert_eq!(frames(&[7.0f64], 3), vec![7.0, 7.0, 7.0]);
        assert_eq!(frames(&[1.0f64, 2.0], 5), vec![1.0, 2.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn bitrate_arithmetic() {
        assert_eq!(
            code_bitrate(Ratio::from_integer(75), 1, 1024),
            Some(Ratio::from_integer(750))
        );
        assert_eq!(
            code_bitrate(Ratio::from_integer(50), 8, 1024),
            Some(Ratio::from_integer(4000))
        );
        assert_eq!(code_bitrate(Ratio::from_integer(50), 8, 1000), None);
    }

    #[test]
    fn exact_codebook_values_give_zero_residual() {
        // Frames of 2 samples drawn from 4 distinct patterns.
        let patterns = [[0.125, -0.25], [0.5, 0.5], [-0.75, 0.375], [0.0, 0.875]];
        let mut rng = CounterRng::new(1);
        let x: Vec<f64> = (0..200).flat_map(|_| patterns[rng.below(4)]).collect();
        let w = Signal::new(x, 8000).unwrap();
        let model = train(std::slice::from_ref(&w), &cfg(2, 1, 4)).unwrap();
        assert_eq!(model.training_stats()[0], 0.0);
        let codes = model.encode(&w, 1).unwrap();
        assert_eq!(model.decode(&codes).unwrap(), w);
    }

    #[test]
    fn training_energy_is_monotone() {
        let corpus: Vec<Signal<f64>> = (0..4).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(8, 4, 16)).unwrap();
        let raw: f64 = corpus
            .iter()
            .flat_map(|w| frames(w.samples(), 8))
            .map(|v| v * v)
            .sum::<f64>()
            / (corpus.iter().map(|w| w.len().div_ceil(8)).sum::<usize>()) as f64;
        let s = model.training_stats();
        assert!(s[0] <= raw);
        for pair in s.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn training_errors() {
        let short = Signal::new(vec![0.1f64, 0.2, 0.3], 8000).unwrap();
        assert!(matches!(
            train(&[short], &cfg(1, 1, 2)),
            Err(RvqError::InsufficientData { frames: 3, needed: 20 })
        ));
        let flat = Signal::new(vec![0.25f64; 400], 8000).unwrap();
        assert!(matches!(train(&[flat], &cfg(2, 1, 4)), Err(RvqError::DegenerateCorpus(4))));
        let a: Signal<f64> = gen_white_noise(0.1, 8000, 1);
        let b: Signal<f64> = gen_white_noise(0.1, 16000, 1);
        assert!(matches!(train(&[a, b], &cfg(2, 1, 4)), Err(RvqError::RateMismatch(..))));
    }

    #[test]
    fn encode_decode_contracts() {
        let corpus: Vec<Signal<f64>> = (0..3).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(4, 3, 8)).unwrap();
        let probe: Signal<f64> = gen_white_noise(0.1013, 8000, 99);
        assert!(matches!(model.encode(&probe, 0), Err(RvqError::StageOutOfRange { .. })));
        assert!(matches!(model.encode(&probe, 4), Err(RvqError::StageOutOfRange { .. })));
        let other_rate: Signal<f64> = gen_white_noise(0.1, 16000, 1);
        assert!(matches!(model.encode(&other_rate, 1), Err(RvqError::RateMismatch(..))));

        let codes = model.encode(&probe, 2).unwrap();
        assert_eq!(codes.frame_count, probe.len().div_ceil(4));
        assert_eq!(model.decode(&codes).unwrap().len(), probe.len());

        let mut foreign = codes.clone();
        foreign.model_id = "deadbeef".into();
        assert!(matches!(model.decode(&foreign), Err(RvqError::ModelMismatch { .. })));
    }

    #[test]
    fn all_zero_codes_tile_the_first_entries() {
        let corpus: Vec<Signal<f64>> = (0..3).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(4, 2, 8)).unwrap();
        let codes = CodeSequence {
            indices: vec![0; 3 * 2],
            frame_count: 3,
            stages_used: 2,
            sample_count: 12,
            model_id: model.id().to_string(),
        };
        let out = model.decode(&codes).unwrap();
        let e0 = model.codebooks()[0].entry(0);
        let e1 = model.codebooks()[1].entry(0);
        for (i, &v) in out.samples().iter().enumerate() {
            assert_eq!(v, e0[i % 4] + e1[i % 4]);
        }
    }

    #[test]
    fn per_frame_residual_energy_never_increases() {
        let corpus: Vec<Signal<f64>> = (0..3).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(4, 4, 8)).unwrap();
        let probe: Signal<f64> = gen_white_noise(0.3013, 8000, 1234).scaled(3.0);
        let errors: Vec<Vec<f64>> = (1..=4)
            .map(|k| model.frame_errors(&probe, &model.encode(&probe, k).unwrap()).unwrap())
            .collect();
        for pair in errors.windows(2) {
            for (hi, lo) in pair[0].iter().zip(&pair[1]) {
                assert!(lo <= hi);
            }
        }
    }

    #[test]
    fn encode_is_a_projection() {
        let corpus: Vec<Signal<f64>> = (0..4).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(4, 4, 16)).unwrap();
        let probe: Signal<f64> = gen_white_noise(0.5007, 8000, 77);
        for k in 1..=4 {
            let codes = model.encode(&probe, k).unwrap();
            let again = model.encode(&model.decode(&codes).unwrap(), k).unwrap();
            assert_eq!(again, codes, "k = {k}");
        }
    }

    #[test]
    fn greedy_matches_exhaustive_search() {
        let corpus: Vec<Signal<f64>> = (0..3).map(|s| gen_white_noise(0.5, 8000, s)).collect();
        let model = train(&corpus, &cfg(4, 3, 8)).unwrap();
        let probe: Signal<f64> = gen_white_noise(0.2, 8000, 5);
        let codes = model.encode_greedy(&probe, 3).unwrap();
        for (f, frame) in frames(probe.samples(), 4).chunks_exact(4).enumerate() {
            let mut residual = frame.to_vec();
            for (s, book) in model.codebooks().iter().enumerate() {
                let dists: Vec<f64> = (0..book.len())
                    .map(|j| book.entry(j).iter().zip(&residual).map(|(c, r)| (c - r) * (c - r)).sum())
                    .collect();
                let best = (0..dists.len()).fold(0, |b, j| if dists[j] < dists[b] { j } else { b });
                assert_eq!(codes.frame(f)[s] as usize, best);
                for (r, c) in residual.iter_mut().zip(book.entry(best)) {
                    *r -= c;
                }
            }
        }
    }
}
