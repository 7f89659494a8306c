//! Stochastic homodyne frames from a squeezer trajectory.
//!
//! The source bandwidth (THz) dwarfs the detector bandwidth, so the field
//! reaching the photodiodes is white Gaussian noise whose instantaneous
//! variance is set by (r(t), θ(t), φ). The detector low-pass filter is the
//! only dynamics applied here. Each frame draws from its own ChaCha stream
//! keyed by (seed, frame index), so frames can be generated in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::opa::SqueezerTrajectory;

/// Samples drawn and discarded ahead of each frame so the detector filter
/// starts in its stationary state.
pub const WARMUP_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorFilter {
    FirstOrder,
    #[default]
    Butterworth2,
    /// Unlimited detector bandwidth.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub bandwidth: f64,
    #[serde(default)]
    pub filter_kind: DetectorFilter,
    pub sample_rate: f64,
    /// Shot-noise clearance over white electronic noise, dB at DC.
    /// `None` means a noiseless amplifier.
    #[serde(default)]
    pub electronic_noise_clearance_db: Option<f64>,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            bandwidth: 200e6,
            filter_kind: DetectorFilter::Butterworth2,
            sample_rate: 1e9,
            electronic_noise_clearance_db: None,
        }
    }
}

/// Direct-form biquad; first-order sections leave b2 = a2 = 0.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let x0 = *v;
            let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            *v = y0;
        }
    }
}

impl DetectorModel {
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::input("detector sample rate must be positive"));
        }
        if self.filter_kind != DetectorFilter::None
            && !(self.bandwidth > 0.0 && self.bandwidth < self.sample_rate / 2.0)
        {
            return Err(Error::input(format!(
                "detector bandwidth {} Hz must lie in (0, {} Hz)",
                self.bandwidth,
                self.sample_rate / 2.0
            )));
        }
        Ok(())
    }

    /// Bilinear-transform design with the cutoff prewarped to `bandwidth`.
    fn biquad(&self) -> Option<Biquad> {
        let k = (PI * self.bandwidth / self.sample_rate).tan();
        match self.filter_kind {
            DetectorFilter::None => None,
            DetectorFilter::FirstOrder => {
                let b0 = k / (1.0 + k);
                Some(Biquad { b: [b0, b0, 0.0], a: [(k - 1.0) / (k + 1.0), 0.0] })
            }
            DetectorFilter::Butterworth2 => {
                let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
                let b0 = k * k * norm;
                Some(Biquad {
                    b: [b0, 2.0 * b0, b0],
                    a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
                })
            }
        }
    }

    /// Applies the causal detector filter in place (zero initial state).
    pub fn filter(&self, x: &mut [f64]) {
        if let Some(bq) = self.biquad() {
            bq.run(x);
        }
    }

    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut h = vec![0.0; n];
        if n > 0 {
            h[0] = 1.0;
        }
        self.filter(&mut h);
        h
    }

    /// |H(f)|² of the digital filter.
    pub fn power_response(&self, f: f64) -> f64 {
        match self.biquad() {
            None => 1.0,
            Some(bq) => {
                let w = 2.0 * PI * f / self.sample_rate;
                let z = |c: &[f64]| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (k, ck) in c.iter().enumerate() {
                        re += ck * (k as f64 * w).cos();
                        im -= ck * (k as f64 * w).sin();
                    }
                    re * re + im * im
                };
                z(&bq.b) / z(&[1.0, bq.a[0], bq.a[1]])
            }
        }
    }

    /// Electronic-noise variance per sample in raw shot-noise units.
    pub fn electronic_noise_variance(&self) -> f64 {
        self.electronic_noise_clearance_db.map_or(0.0, |c| 10f64.powf(-c / 10.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoEntry {
    pub phase: f64,
    pub n_frames: usize,
}

/// LO phases and how many frames to record at each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoSchedule {
    pub entries: Vec<LoEntry>,
}

impl LoSchedule {
    pub fn single(phase: f64, n_frames: usize) -> Self {
        Self { entries: vec![LoEntry { phase, n_frames }] }
    }

    /// `count` phases at `step` spacing starting from 0, `n_frames` each.
    pub fn uniform(count: usize, step: f64, n_frames: usize) -> Self {
        Self { entries: (0..count).map(|k| LoEntry { phase: k as f64 * step, n_frames }).collect() }
    }

    pub fn total_frames(&self) -> usize {
        self.entries.iter().map(|e| e.n_frames).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::input("LO schedule is empty"));
        }
        for e in &self.entries {
            if e.n_frames == 0 {
                return Err(Error::input("every LO phase needs at least one frame"));
            }
            if !(0.0..2.0 * PI).contains(&e.phase) {
                return Err(Error::input(format!("LO phase {} outside [0, 2pi)", e.phase)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Signal,
    VacuumReference,
}

impl FrameKind {
    fn code(self) -> u8 {
        match self {
            FrameKind::Signal => 0,
            FrameKind::VacuumReference => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(FrameKind::Signal),
            1 => Ok(FrameKind::VacuumReference),
            _ => Err(Error::Format(format!("unknown frame kind code {c}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            FrameKind::Signal => "signal",
            FrameKind::VacuumReference => "vacuum_reference",
        }
    }
}

/// A batch of equal-length homodyne records (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub dt: f64,
    /// Time of sample 0 relative to the AWG start.
    pub t0: f64,
    pub n_samples: usize,
    pub data: Vec<f64>,
    pub phase_tags: Vec<f64>,
    pub kind: FrameKind,
    pub rng_seed: u64,
    /// Samples at each end affected by filter start-up.
    pub transient_samples: usize,
}

const BINARY_MAGIC: &[u8; 8] = b"TMSQFS01";

impl FrameSet {
    pub fn n_frames(&self) -> usize {
        self.phase_tags.len()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_samples.max(1))
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Frames whose LO tag equals `phase` (within 1e-9 rad).
    pub fn with_phase(&self, phase: f64) -> FrameSet {
        let idx: Vec<usize> =
            (0..self.n_frames()).filter(|&i| (self.phase_tags[i] - phase).abs() < 1e-9).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, idx: &[usize]) -> FrameSet {
        let mut data = Vec::with_capacity(idx.len() * self.n_samples);
        for &i in idx {
            data.extend_from_slice(self.frame(i));
        }
        FrameSet {
            data,
            phase_tags: idx.iter().map(|&i| self.phase_tags[i]).collect(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> FrameSet {
        FrameSet {
            dt: self.dt,
            t0: self.t0,
            n_samples: self.n_samples,
            data: Vec::new(),
            phase_tags: Vec::new(),
            kind: self.kind,
            rng_seed: self.rng_seed,
            transient_samples: self.transient_samples,
        }
    }

    /// Distinct LO phases in order of first appearance.
    pub fn phases(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &p in &self.phase_tags {
            if !out.iter().any(|q| (q - p).abs() < 1e-9) {
                out.push(p);
            }
        }
        out
    }

    /// Global gain applied to every sample.
    pub fn scaled(&self, gain: f64) -> FrameSet {
        FrameSet { data: self.data.iter().map(|v| v * gain).collect(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.phase_tags.is_empty() {
            return Err(Error::input("frame set is empty"));
        }
        if self.data.len() != self.n_samples * self.n_frames() {
            return Err(Error::input("frame data size does not match the header"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::input("frame dt must be positive"));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("frame data contains non-finite values"));
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n_frames() as u64).to_le_bytes())?;
        w.write_all(&(self.n_samples as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.t0.to_le_bytes())?;
        w.write_all(&self.rng_seed.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        w.write_all(&(self.transient_samples as u64).to_le_bytes())?;
        for v in self.phase_tags.iter().chain(&self.data) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<FrameSet> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a frame-set file".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_frames = next_u64(&mut r)? as usize;
        let n_samples = next_u64(&mut r)? as usize;
        let dt = f64::from_bits(next_u64(&mut r)?);
        let t0 = f64::from_bits(next_u64(&mut r)?);
        let rng_seed = next_u64(&mut r)?;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let transient_samples = next_u64(&mut r)? as usize;
        let total = n_frames
            .checked_mul(n_samples + 1)
            .ok_or_else(|| Error::Format("frame-set header overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != total * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                total * 8,
                bytes.len()
            )));
        }
        let values: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FrameSet {
            dt,
            t0,
            n_samples,
            phase_tags: values[..n_frames].to_vec(),
            data: values[n_frames..].to_vec(),
            kind: FrameKind::from_code(kind[0])?,
            rng_seed,
            transient_samples,
        })
    }

    /// `#`-prefixed header lines, then one row per frame: phase tag followed
    /// by the samples. Values use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# tmsq frameset v1\n");
        out.push_str(&format!("# dt={}\n# t0={}\n", self.dt, self.t0));
        out.push_str(&format!("# n_frames={}\n# n_samples={}\n", self.n_frames(), self.n_samples));
        out.push_str(&format!("# seed={}\n# kind={}\n", self.rng_seed, self.kind.name()));
        out.push_str(&format!("# transient_samples={}\n", self.transient_samples));
        out.push_str("phase_rad,samples\n");
        for (i, f) in self.frames().enumerate() {
            out.push_str(&self.phase_tags[i].to_string());
            for v in f {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<FrameSet> {
        let bad = |m: &str| Error::Format(format!("frame-set csv: {m}"));
        let mut header = std::collections::HashMap::new();
        let mut phase_tags = Vec::new();
        let mut data = Vec::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("# ") {
                if let Some((k, v)) = h.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if line.starts_with("phase_rad") || line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let tag = it.next().ok_or_else(|| bad("empty row"))?;
            phase_tags.push(tag.parse::<f64>().map_err(|_| bad("bad phase tag"))?);
            for v in it {
                data.push(v.parse::<f64>().map_err(|_| bad("bad sample"))?);
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing {k}")));
        let kind = match get("kind")?.as_str() {
            "signal" => FrameKind::Signal,
            "vacuum_reference" => FrameKind::VacuumReference,
            other => return Err(bad(&format!("unknown kind {other}"))),
        };
        let parse_f = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(k)) };
        let parse_u = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(k)) };
        let fs = FrameSet {
            dt: parse_f("dt")?,
            t0: parse_f("t0")?,
            n_samples: parse_u("n_samples")? as usize,
            data,
            phase_tags,
            kind,
            rng_seed: parse_u("seed")?,
            transient_samples: parse_u("transient_samples")? as usize,
        };
        if fs.n_frames() != parse_u("n_frames")? as usize || fs.data.len() != fs.n_frames() * fs.n_samples {
            return Err(bad("row count or width does not match the header"));
        }
        Ok(fs)
    }
}

fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index);
    rng
}

/// Draws one frame: white noise with per-sample standard deviation `sd`,
/// detector-filtered, plus electronic noise.
fn draw_frame(out: &mut [f64], sd: &[f64], det: &DetectorModel, seed: u64, index: u64) {
    let mut rng = frame_rng(seed, index);
    let n = out.len();
    let mut buf = Vec::with_capacity(WARMUP_SAMPLES + n);
    for _ in 0..WARMUP_SAMPLES {
        buf.push(sd[0] * rng.sample::<f64, _>(StandardNormal));
    }
    for &s in sd {
        buf.push(s * rng.sample::<f64, _>(StandardNormal));
    }
    det.filter(&mut buf);
    out.copy_from_slice(&buf[WARMUP_SAMPLES..]);
    let e = det.electronic_noise_variance().sqrt();
    if e > 0.0 {
        for v in out.iter_mut() {
            *v += e * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Simulates homodyne frames for every entry of the LO schedule.
///
/// Raw samples are in shot-noise units before the detector filter; the
/// filter has unit DC gain, so a vacuum reference run through the same
/// pipeline is the normalization for every downstream statistic.
pub fn simulate_frames(
    traj: &SqueezerTrajectory,
    det: &DetectorModel,
    lo: &LoSchedule,
    seed: u64,
) -> Result<FrameSet> {
    det.validate()?;
    lo.validate()?;
    traj.validate()?;
    let traj = traj.resampled(det.dt());
    let n = traj.len();
    let mut phase_tags = Vec::with_capacity(lo.total_frames());
    let mut sds = Vec::with_capacity(lo.entries.len());
    for e in &lo.entries {
        let sd: Vec<f64> = traj.variance_trace(e.phase).into_iter().map(f64::sqrt).collect();
        sds.push(sd);
        phase_tags.extend(std::iter::repeat_n(e.phase, e.n_frames));
    }
    let entry_of: Vec<usize> =
        lo.entries.iter().enumerate().flat_map(|(k, e)| std::iter::repeat_n(k, e.n_frames)).collect();
    let mut data = vec![0.0; n * phase_tags.len()];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        draw_frame(out, &sds[entry_of[i]], det, seed, i as u64);
    });
    Ok(FrameSet {
        dt: det.dt(),
        t0: 0.0,
        n_samples: n,
        data,
        phase_tags,
        kind: FrameKind::Signal,
        rng_seed: seed,
        transient_samples: 0,
    })
}

/// Shot-noise reference: the same pipeline with r ≡ 0.
pub fn simulate_vacuum_reference(
    det: &DetectorModel,
    n_samples: usize,
    n_frames: usize,
    seed: u64,
) -> Result<FrameSet> {
    if n_samples == 0 {
        return Err(Error::input("reference frames need at least one sample"));
    }
    let traj = SqueezerTrajectory::vacuum(det.dt(), n_samples);
    let mut fs = simulate_frames(&traj, det, &LoSchedule::single(0.0, n_frames), seed)?;
    fs.kind = FrameKind::VacuumReference;
    Ok(fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use std::f64::consts::FRAC_PI_2;

    fn column_variance(fs: &FrameSet, i: usize) -> f64 {
        let col: Vec<f64> = fs.frames().map(|f| f[i]).collect();
        stats::variance(&col)
    }

    #[test]
    fn zero_frames_rejected() {
        let traj = SqueezerTrajectory::vacuum(1e-9, 10);
        let det = DetectorModel::default();
        assert!(simulate_frames(&traj, &det, &LoSchedule::single(0.0, 0), 1).is_err());
        assert!(simulate_vacuum_reference(&det, 10, 0, 1).is_err());
    }

    #[test]
    fn bandwidth_validation() {
        let det = DetectorModel { bandwidth: 600e6, ..Default::default() };
        assert!(det.validate().is_err());
        let none = DetectorModel { bandwidth: 0.0, filter_kind: DetectorFilter::None, ..Default::default() };
        none.validate().unwrap();
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let det = DetectorModel::default();
        let a = simulate_vacuum_reference(&det, 64, 20, 5).unwrap();
        let b = simulate_vacuum_reference(&det, 64, 20, 5).unwrap();
        let c = simulate_vacuum_reference(&det, 64, 20, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, c.data);
        // A frame's content depends only on (seed, index).
        let big = simulate_vacuum_reference(&det, 64, 40, 5).unwrap();
        assert_eq!(&big.data[..a.data.len()], &a.data[..]);
    }

    #[test]
    fn filtered_vacuum_variance_is_stationary() {
        let det = DetectorModel::default();
        let n_frames = 4000;
        let fs = simulate_vacuum_reference(&det, 50, n_frames, 9).unwrap();
        // Stationary variance of the filtered white noise: Σ h².
        let h = det.impulse_response(400);
        let expect: f64 = h.iter().map(|x| x * x).sum();
        let se = expect * (2.0 / n_frames as f64).sqrt();
        for i in [0, 1, 2, 25, 49] {
            let v = column_variance(&fs, i);
            assert!((v - expect).abs() < 3.5 * se, "sample {i}: {v} vs {expect}");
        }
    }

    #[test]
    fn unfiltered_squeezed_variance() {
        let det = DetectorModel { filter_kind: DetectorFilter::None, ..Default::default() };
        let traj = SqueezerTrajectory::constant(0.312, 0.0, 0.183, 1e-9, 20).unwrap();
        let lo = LoSchedule { entries: vec![LoEntry { phase: 0.0, n_frames: 5000 }, LoEntry { phase: FRAC_PI_2, n_frames: 5000 }] };
        let fs = simulate_frames(&traj, &det, &lo, 3).unwrap();
        let x = fs.with_phase(0.0);
        let p = fs.with_phase(FRAC_PI_2);
        let vx: f64 = (0..20).map(|i| column_variance(&x, i)).sum::<f64>() / 20.0;
        let vp: f64 = (0..20).map(|i| column_variance(&p, i)).sum::<f64>() / 20.0;
        let vs = traj.params_at(0).squeezed_variance();
        let va = traj.params_at(0).antisqueezed_variance();
        assert!((vx / vs - 1.0).abs() < 0.02, "{vx}");
        assert!((vp / va - 1.0).abs() < 0.02, "{vp}");
    }

    #[test]
    fn butterworth_response() {
        let det = DetectorModel::default();
        assert!((det.power_response(0.0) - 1.0).abs() < 1e-12);
        assert!((det.power_response(200e6) - 0.5).abs() < 1e-9);
        assert!(det.power_response(499e6) < 1e-3);
        let fo = DetectorModel { filter_kind: DetectorFilter::FirstOrder, ..det };
        assert!((fo.power_response(200e6) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let det = DetectorModel::default();
        let mut fs = simulate_vacuum_reference(&det, 17, 5, 77).unwrap();
        fs.t0 = -1.5e-7;
        fs.transient_samples = 3;
        let mut buf = Vec::new();
        fs.write_binary(&mut buf).unwrap();
        assert_eq!(FrameSet::read_binary(&buf[..]).unwrap(), fs);
        assert_eq!(FrameSet::from_csv(&fs.to_csv()).unwrap(), fs);
        assert!(FrameSet::read_binary(&buf[..buf.len() - 8]).is_err());
        assert!(FrameSet::read_binary(&b"garbage!"[..]).is_err());
    }
}
