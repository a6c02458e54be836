//! Reference codecs with known behaviour.
//!
//! * `identity`: exactly linear
//! * `gain-<g>`: pure scaling, linear
//! * `avg2`: two-tap moving average, linear time-invariant with
//!   `|H(f)| = |cos(pi f / fs)|`
//! * `mulaw-<bits>`: mu-law companding quantiser, nonlinear near its
//!   quantisation floor
//! * `hardclip-<t>`: saturates at `±t`, grossly non-homogeneous
//! * `rvq`: the trained residual vector quantiser, one mode per stage count

use std::sync::Arc;

use super::{BitrateMode, Codec, CodecDescriptor, CodecError, CodecKind, CodecUnderTest};
use crate::{RvqModel, Waveform};

pub const DEFAULT_NATIVE_RATE: u32 = 16000;
const DEFAULT_MODE: &str = "default";
const MULAW_MU: f64 = 255.0;

fn descriptor(name: String, rate: u32, bits_per_sample: f64) -> CodecDescriptor {
    CodecDescriptor {
        name,
        kind: CodecKind::Builtin,
        native_rate: rate,
        bitrate_modes: vec![BitrateMode {
            mode_id: DEFAULT_MODE.into(),
            bits_per_second: f64::from(rate) * bits_per_sample,
        }],
        command_template: None,
        timeout: 600.0,
        frame_size: Some(0),
    }
}

fn map_samples(w: &Waveform, f: impl Fn(f64) -> f64) -> Result<Waveform, CodecError> {
    Waveform::new(w.samples().iter().map(|&x| f(x)).collect(), w.sample_rate())
        .map_err(|_| CodecError::NonFiniteOutput)
}

pub struct Identity(CodecDescriptor);

impl Identity {
    pub fn new(rate: u32) -> Self {
        Self(descriptor("identity".into(), rate, 32.0))
    }
}

impl Codec for Identity {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.0
    }

    fn transform(&self, input: &Waveform, _mode: &str) -> Result<Waveform, CodecError> {
        Ok(input.clone())
    }
}

pub struct PureGain {
    desc: CodecDescriptor,
    gain: f64,
}

impl PureGain {
    pub fn new(rate: u32, gain: f64) -> Self {
        Self {
            desc: descriptor(format!("gain-{gain}"), rate, 32.0),
            gain,
        }
    }
}

impl Codec for PureGain {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.desc
    }

    fn transform(&self, input: &Waveform, _mode: &str) -> Result<Waveform, CodecError> {
        map_samples(input, |x| x * self.gain)
    }
}

pub struct MovingAverage(CodecDescriptor);

impl MovingAverage {
    pub fn new(rate: u32) -> Self {
        Self(descriptor("avg2".into(), rate, 32.0))
    }

    /// Magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64) -> f64 {
        (std::f64::consts::PI * freq / f64::from(self.0.native_rate)).cos().abs()
    }
}

impl Codec for MovingAverage {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.0
    }

    fn transform(&self, input: &Waveform, _mode: &str) -> Result<Waveform, CodecError> {
        let x = input.samples();
        let y = (0..x.len())
            .map(|n| 0.5 * (x[n] + if n > 0 { x[n - 1] } else { 0.0 }))
            .collect();
        Waveform::new(y, input.sample_rate()).map_err(|_| CodecError::NonFiniteOutput)
    }
}

/// Mu-law (mu = 255) companding with a uniform `bits`-bit quantiser on
/// the companded value: levels `-L..=L` with `L = 2^(bits-1) - 1`, so zero
/// is a codeword. Input is clamped to `[-1, 1]`.
pub struct MuLaw {
    desc: CodecDescriptor,
    levels: f64,
}

impl MuLaw {
    pub fn new(rate: u32, bits: u32) -> Result<Self, CodecError> {
        if !(2..=16).contains(&bits) {
            return Err(CodecError::Config(format!("mulaw bits {bits} outside 2..=16")));
        }
        Ok(Self {
            desc: descriptor(format!("mulaw-{bits}"), rate, f64::from(bits)),
            levels: f64::from((1u32 << (bits - 1)) - 1),
        })
    }

    pub fn encode_sample(&self, x: f64) -> i32 {
        let x = x.clamp(-1.0, 1.0);
        let y = x.signum() * (MULAW_MU * x.abs()).ln_1p() / MULAW_MU.ln_1p();
        (y * self.levels).round() as i32
    }

    pub fn decode_sample(&self, q: i32) -> f64 {
        let mag = ((1.0 + MULAW_MU).powf(f64::from(q.unsigned_abs()) / self.levels) - 1.0) / MULAW_MU;
        if q < 0 {
            -mag
        } else {
            mag
        }
    }
}

impl Codec for MuLaw {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.desc
    }

    fn transform(&self, input: &Waveform, _mode: &str) -> Result<Waveform, CodecError> {
        map_samples(input, |x| self.decode_sample(self.encode_sample(x)))
    }
}

pub struct HardClip {
    desc: CodecDescriptor,
    threshold: f64,
}

impl HardClip {
    pub fn new(rate: u32, threshold: f64) -> Result<Self, CodecError> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(CodecError::Config(format!("hardclip threshold {threshold}")));
        }
        Ok(Self {
            desc: descriptor(format!("hardclip-{threshold}"), rate, 32.0),
            threshold,
        })
    }
}

impl Codec for HardClip {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.desc
    }

    fn transform(&self, input: &Waveform, _mode: &str) -> Result<Waveform, CodecError> {
        map_samples(input, |x| x.clamp(-self.threshold, self.threshold))
    }
}

pub struct RvqCodec {
    desc: CodecDescriptor,
    model: Arc<RvqModel>,
}

impl RvqCodec {
    pub fn new(model: Arc<RvqModel>) -> Self {
        let bitrate_modes = (1..=model.stages())
            .map(|k| BitrateMode {
                mode_id: format!("k{k}"),
                bits_per_second: model.bitrate(k).expect("k within range"),
            })
            .collect();
        let desc = CodecDescriptor {
            name: "rvq".into(),
            kind: CodecKind::Builtin,
            native_rate: model.sample_rate(),
            bitrate_modes,
            command_template: None,
            timeout: 600.0,
            frame_size: Some(model.frame_size()),
        };
        Self { desc, model }
    }

    pub fn model(&self) -> &RvqModel {
        &self.model
    }

    fn stages_for(&self, mode: &str) -> Result<usize, CodecError> {
        mode.strip_prefix('k')
            .and_then(|k| k.parse().ok())
            .filter(|&k| k >= 1 && k <= self.model.stages())
            .ok_or_else(|| CodecError::UnknownMode(mode.to_string()))
    }
}

impl Codec for RvqCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.desc
    }

    fn transform(&self, input: &Waveform, mode: &str) -> Result<Waveform, CodecError> {
        let k = self.stages_for(mode)?;
        let codes = self
            .model
            .encode(input, k)
            .map_err(|e| CodecError::MalformedOutput(e.to_string()))?;
        self.model
            .decode(&codes)
            .map_err(|e| CodecError::MalformedOutput(e.to_string()))
    }
}

fn parse_param(name: &str, prefix: &str) -> Option<f64> {
    name.strip_prefix(prefix)?.parse().ok()
}

/// Instantiates a builtin by catalog name.
pub fn builtin_codec(
    name: &str,
    native_rate: u32,
    rvq: Option<Arc<RvqModel>>,
) -> Result<CodecUnderTest, CodecError> {
    let codec = match name {
        "identity" => CodecUnderTest::new(Identity::new(native_rate)),
        "avg2" => CodecUnderTest::new(MovingAverage::new(native_rate)),
        "rvq" => {
            let model = rvq.ok_or_else(|| CodecError::Config("rvq codec needs a trained model".into()))?;
            CodecUnderTest::new(RvqCodec::new(model))
        }
        _ => {
            if let Some(g) = parse_param(name, "gain-").filter(|g| g.is_finite()) {
                CodecUnderTest::new(PureGain::new(native_rate, g))
            } else if let Some(t) = parse_param(name, "hardclip-") {
                CodecUnderTest::new(HardClip::new(native_rate, t)?)
            } else if let Some(bits) = name.strip_prefix("mulaw-").and_then(|b| b.parse().ok()) {
                CodecUnderTest::new(MuLaw::new(native_rate, bits)?)
            } else {
                return Err(CodecError::UnknownCodec(name.to_string()));
            }
        }
    };
    Ok(codec)
}

/// Descriptors of the standard reference set.
pub fn builtin_catalog(native_rate: u32, rvq: Option<&RvqModel>) -> Vec<CodecDescriptor> {
    let mut out = vec![Identity::new(native_rate).0];
    for bits in [4, 6, 8] {
        out.push(MuLaw::new(native_rate, bits).expect("valid bits").desc);
    }
    for t in [0.1, 0.5] {
        out.push(HardClip::new(native_rate, t).expect("valid threshold").desc);
    }
    out.push(PureGain::new(native_rate, 0.5).desc);
    out.push(MovingAverage::new(native_rate).0);
    if let Some(model) = rvq {
        out.push(RvqCodec::new(Arc::new(model.clone())).desc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{gen_sine, gen_white_noise};
    use proptest::prelude::*;

    fn run(name: &str, w: &Waveform) -> Waveform {
        builtin_codec(name, w.sample_rate(), None)
            .unwrap()
            .process(w, "default")
            .unwrap()
    }

    #[test]
    fn catalog_contents() {
        let cat = builtin_catalog(16000, None);
        let names: Vec<&str> = cat.iter().map(|d| d.name.as_str()).collect();
        assert!(names.contains(&"identity"));
        for n in ["mulaw-4", "mulaw-6", "mulaw-8", "hardclip-0.1", "hardclip-0.5", "gain-0.5", "avg2"] {
            assert!(names.contains(&n), "{n}");
        }
        let mulaw8 = cat.iter().find(|d| d.name == "mulaw-8").unwrap();
        assert_eq!(mulaw8.bitrate_modes[0].bits_per_second, 16000.0 * 8.0);
        for d in &cat {
            d.validate().unwrap();
            assert!(builtin_codec(&d.name, 16000, None).is_ok());
        }
        assert!(matches!(builtin_codec("opus", 16000, None), Err(CodecError::UnknownCodec(_))));
        assert!(matches!(builtin_codec("rvq", 16000, None), Err(CodecError::Config(_))));
    }

    #[test]
    fn identity_and_clip_examples() {
        let w: Waveform = gen_white_noise(0.1, 16000, 3);
        assert_eq!(run("identity", &w), w);
        let c = Waveform::new(vec![0.8; 10], 16000).unwrap();
        assert!(run("hardclip-0.5", &c).samples().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mulaw_zero_is_a_codeword() {
        let z = Waveform::zeros(32, 16000).unwrap();
        assert!(run("mulaw-8", &z).samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mulaw_error_bounded_by_local_step() {
        // Brute force: the decoded value must be the nearest codeword in the
        // companded domain, and within half a step of the input.
        let sine: Waveform = gen_sine(1000.0, 0.1, 16000, 1.0, 0.0).unwrap();
        let out = run("mulaw-8", &sine);
        let codec = MuLaw::new(16000, 8).unwrap();
        let codewords: Vec<f64> = (-127..=127).map(|q| codec.decode_sample(q)).collect();
        let mut worst = 0.0f64;
        for (&x, &y) in sine.samples().iter().zip(out.samples()) {
            let err = (x - y).abs();
            let pos = codewords.partition_point(|&c| c < x).min(codewords.len() - 1);
            let lo = codewords[pos.saturating_sub(1)];
            let hi = codewords[pos];
            assert!(err <= (hi - lo) + 1e-12);
            worst = worst.max(err);
        }
        assert!(worst < 0.04, "{worst}");
    }

    #[test]
    fn moving_average_response() {
        let c = MovingAverage::new(16000);
        assert!((c.magnitude(0.0) - 1.0).abs() < 1e-15);
        assert!(c.magnitude(8000.0).abs() < 1e-12);
    }

    #[test]
    fn rvq_modes() {
        use crate::rvq::{train, TrainConfig};
        let corpus: Vec<Waveform> = (0..2).map(|s| gen_white_noise(0.3, 8000, s)).collect();
        let model = train(&corpus, &TrainConfig { frame_size: 4, stages: 3, entries: 8, seed: 1 }).unwrap();
        let codec = builtin_codec("rvq", 8000, Some(Arc::new(model.clone()))).unwrap();
        let modes: Vec<&str> = codec.descriptor().mode_ids().collect();
        assert_eq!(modes, vec!["k1", "k2", "k3"]);
        assert_eq!(codec.descriptor().bitrate_modes[1].bits_per_second, 2000.0 * 2.0 * 3.0);
        let w = &corpus[0];
        let direct = model.decode(&model.encode(w, 2).unwrap()).unwrap();
        assert_eq!(codec.process(w, "k2").unwrap(), direct);
        assert!(matches!(codec.process(w, "k4"), Err(CodecError::UnknownMode(_))));
        assert_eq!(builtin_catalog(8000, Some(&model)).last().unwrap().name, "rvq");
    }

    proptest! {
        #[test]
        fn identity_is_exact(x in prop::collection::vec(-10.0f64..10.0, 0..300)) {
            let w = Waveform::new(x, 16000).unwrap();
            prop_assert_eq!(run("identity", &w), w);
        }

        #[test]
        fn mulaw_is_idempotent(x in prop::collection::vec(-1.5f64..1.5, 1..300), bits in prop::sample::select(vec![4u32, 6, 8])) {
            let name = format!("mulaw-{bits}");
            let w = Waveform::new(x, 16000).unwrap();
            let once = run(&name, &w);
            prop_assert_eq!(run(&name, &once), once);
        }

        #[test]
        fn hardclip_homogeneous_below_threshold(
            x in prop::collection::vec(-0.5f64..0.5, 1..200),
            alpha in 0.01f64..1.0,
        ) {
            let w = Waveform::new(x, 16000).unwrap();
            let lhs = run("hardclip-0.5", &w.scaled(alpha));
            let rhs = run("hardclip-0.5", &w).scaled(alpha);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
