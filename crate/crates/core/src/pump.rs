//! AWG programs, the voltage → pump-power calibration, and modulator dynamics.
//!
//! The AWG voltage drives an acousto-optic modulator. Pump power follows
//! P = a·V² up to a linear ceiling (160 mV by default) and an optional
//! measured lookup table beyond it. The sign of V selects the pump phase
//! (0 or π), which rotates the squeezed quadrature by 90°.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::opa::LossBudget;
use crate::quantum;

/// Default simulation / AWG sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 1e9;
pub const DEFAULT_LINEAR_LIMIT_V: f64 = 0.160;
pub const DEFAULT_MAX_PUMP_MW: f64 = 6.5;
/// Pure squeezing level reached at the maximum pump power, dB.
pub const DEFAULT_PURE_DB_AT_MAX: f64 = 2.71;
pub const DEFAULT_LOSS: f64 = 0.183;
pub const DEFAULT_RISE_TIME: f64 = 7e-9;
pub const DEFAULT_MODE_WIDTH: f64 = 30e-9;
pub const DEFAULT_MARGIN: f64 = 50e-9;

/// Sampled voltage waveform; t = 0 is the start of the AWG output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwgProgram {
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub trigger_offset_s: f64,
    pub samples_v: Vec<f64>,
}

impl AwgProgram {
    pub fn new(sample_rate_hz: f64, samples_v: Vec<f64>) -> Result<Self> {
        let p = Self { sample_rate_hz, trigger_offset_s: 0.0, samples_v };
        p.validate_shape()?;
        Ok(p)
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::input("sample rate must be positive"));
        }
        if self.samples_v.is_empty() {
            return Err(Error::input("program has no samples"));
        }
        if self.samples_v.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("program has non-finite samples"));
        }
        Ok(())
    }

    /// Checks the shape and that no sample exceeds the calibration ceiling.
    pub fn validate(&self, cal: &Calibration) -> Result<()> {
        self.validate_shape()?;
        let ceiling = cal.voltage_ceiling();
        if let Some((i, v)) =
            self.samples_v.iter().enumerate().find(|(_, v)| v.abs() > ceiling * (1.0 + 1e-12))
        {
            return Err(Error::domain(format!(
                "sample {i}: |{v}| V exceeds the {ceiling} V ceiling"
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_v.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt()
    }

    /// Prepends and appends zero-volt samples.
    pub fn padded(&self, before: usize, after: usize) -> Self {
        let mut samples_v = vec![0.0; before];
        samples_v.extend_from_slice(&self.samples_v);
        samples_v.extend(std::iter::repeat_n(0.0, after));
        Self {
            sample_rate_hz: self.sample_rate_hz,
            trigger_offset_s: self.trigger_offset_s - before as f64 * self.dt(),
            samples_v,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate_shape()?;
        Ok(p)
    }

    /// `time_s,volts` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,volts\n");
        let dt = self.dt();
        for (i, v) in self.samples_v.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.trigger_offset_s + i as f64 * dt, v));
        }
        out
    }

    /// Reconstructs the pulse-train spec that this program realizes.
    ///
    /// The program must be a staircase of equal-length constant slots.
    pub fn to_pulse_train(
        &self,
        cal: &Calibration,
        mode_width: f64,
        margin: f64,
    ) -> Result<PulseTrainSpec> {
        let period = mode_width + margin;
        let n_slot = slot_samples(period, self.sample_rate_hz)?;
        if self.len() % n_slot != 0 {
            return Err(Error::input("program length is not a whole number of slots"));
        }
        let mut slots = Vec::with_capacity(self.len() / n_slot);
        for chunk in self.samples_v.chunks(n_slot) {
            let v = chunk[0];
            if chunk.iter().any(|&x| x != v) {
                return Err(Error::input("program is not piecewise constant per slot"));
            }
            let target = if v == 0.0 {
                SlotTarget::Vacuum
            } else {
                let p = cal.power_from_voltage(v.abs())?;
                let r = cal.gain_coeff * p.sqrt();
                SlotTarget::Squeezed {
                    squeezing_db: quantum::pure_db_from_r(r),
                    quadrature: if v > 0.0 { Quadrature::XSqueezed } else { Quadrature::PSqueezed },
                }
            };
            slots.push(Slot { target });
        }
        Ok(PulseTrainSpec { slots, mode_width, margin, sample_rate_hz: self.sample_rate_hz })
    }
}

/// Voltage → pump-power calibration plus the OPA gain coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// mW/V², P = quad_coeff·V² in the linear region.
    pub quad_coeff: f64,
    /// Volts.
    pub linear_limit: f64,
    /// Monotone (|V| volts, P mW) pairs extending beyond the linear region.
    #[serde(default)]
    pub extended_lut: Option<Vec<(f64, f64)>>,
    /// mW^(−1/2), r = gain_coeff·√P.
    pub gain_coeff: f64,
    /// mW.
    pub max_pump_power: f64,
    #[serde(default)]
    pub gain_fit_residual: Option<f64>,
    #[serde(default)]
    pub loss_budget: Option<LossBudget>,
    /// Total loss applied downstream of the OPA. Defaults to the fitted 18.3%.
    #[serde(default = "default_loss")]
    pub loss: f64,
}

fn default_loss() -> f64 {
    DEFAULT_LOSS
}

impl Default for Calibration {
    /// Synthetic calibration: 160 mV ↦ 6.5 mW ↦ 2.71 dB pure squeezing.
    fn default() -> Self {
        let r_max = quantum::r_from_pure_db(DEFAULT_PURE_DB_AT_MAX).expect("positive dB");
        Self {
            quad_coeff: DEFAULT_MAX_PUMP_MW / (DEFAULT_LINEAR_LIMIT_V * DEFAULT_LINEAR_LIMIT_V),
            linear_limit: DEFAULT_LINEAR_LIMIT_V,
            extended_lut: None,
            gain_coeff: r_max / DEFAULT_MAX_PUMP_MW.sqrt(),
            max_pump_power: DEFAULT_MAX_PUMP_MW,
            gain_fit_residual: None,
            loss_budget: Some(LossBudget::default()),
            loss: DEFAULT_LOSS,
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!("calibration {name} must be positive, got {v}")))
            }
        };
        positive("quad_coeff", self.quad_coeff)?;
        positive("linear_limit", self.linear_limit)?;
        positive("gain_coeff", self.gain_coeff)?;
        positive("max_pump_power", self.max_pump_power)?;
        if !(0.0..1.0).contains(&self.loss) {
            return Err(Error::input(format!("calibration loss must lie in [0, 1), got {}", self.loss)));
        }
        if let Some(lut) = &self.extended_lut {
            if lut.len() < 2 {
                return Err(Error::input("extended LUT needs at least two points"));
            }
            if lut.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
                return Err(Error::input("extended LUT must be strictly increasing in both columns"));
            }
            if !(lut[0].0 <= self.linear_limit && self.linear_limit < lut[lut.len() - 1].0) {
                return Err(Error::input("extended LUT must straddle the linear limit"));
            }
            let at_limit = interp(lut, self.linear_limit, |p| p.0, |p| p.1);
            let quad = self.quad_coeff * self.linear_limit * self.linear_limit;
            if (at_limit - quad).abs() > 0.01 * quad {
                return Err(Error::input(format!(
                    "extended LUT gives {at_limit} mW at the linear limit, quadratic law gives {quad} mW"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Largest |V| the calibration can map to a power.
    pub fn voltage_ceiling(&self) -> f64 {
        match &self.extended_lut {
            Some(lut) => lut[lut.len() - 1].0.max(self.linear_limit),
            None => self.linear_limit,
        }
    }

    /// Pump power (mW) for a drive magnitude |V|.
    pub fn power_from_voltage(&self, v_abs: f64) -> Result<f64> {
        let v = v_abs.abs();
        if v <= self.linear_limit {
            return Ok(self.quad_coeff * v * v);
        }
        match &self.extended_lut {
            Some(lut) if v <= lut[lut.len() - 1].0 => Ok(interp(lut, v, |p| p.0, |p| p.1)),
            _ => Err(Error::domain(format!(
                "|V| = {v} V is outside the calibrated domain (ceiling {} V)",
                self.voltage_ceiling()
            ))),
        }
    }

    /// Drive magnitude |V| producing pump power `p_mw`.
    pub fn voltage_for_power(&self, p_mw: f64) -> Result<f64> {
        if !(p_mw.is_finite() && p_mw >= 0.0) {
            return Err(Error::domain(format!("pump power must be >= 0, got {p_mw}")));
        }
        let p_lin = self.quad_coeff * self.linear_limit * self.linear_limit;
        if p_mw <= p_lin {
            return Ok((p_mw / self.quad_coeff).sqrt());
        }
        match &self.extended_lut {
            Some(lut) if p_mw <= lut[lut.len() - 1].1 => Ok(interp(lut, p_mw, |p| p.1, |p| p.0)),
            Some(_) => Err(Error::domain(format!("{p_mw} mW exceeds the extended LUT range"))),
            None => Err(Error::domain(format!(
                "{p_mw} mW needs more than the linear region ({p_lin} mW) and no extended LUT is supplied"
            ))),
        }
    }

    /// Pump power needed for squeezing parameter `r`.
    pub fn power_for_r(&self, r: f64) -> f64 {
        let s = r / self.gain_coeff;
        s * s
    }
}

fn interp(
    table: &[(f64, f64)],
    x: f64,
    key: impl Fn(&(f64, f64)) -> f64,
    val: impl Fn(&(f64, f64)) -> f64,
) -> f64 {
    let i = table.partition_point(|p| key(p) < x).clamp(1, table.len() - 1);
    let (a, b) = (&table[i - 1], &table[i]);
    let t = (x - key(a)) / (key(b) - key(a));
    val(a) + t * (val(b) - val(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelModel {
    #[default]
    FirstOrder,
    Gaussian,
}

/// Decaying beat oscillation superposed after rising edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ringing {
    pub frequency: f64,
    pub relative_amplitude: f64,
    pub decay_time: f64,
}

impl Default for Ringing {
    fn default() -> Self {
        Self { frequency: 250e6, relative_amplitude: 0.05, decay_time: 20e-9 }
    }
}

/// Pump modulation chain response (AWG → RF → AOM → pump power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatorResponse {
    pub rise_time_10_90: f64,
    #[serde(default)]
    pub model_kind: KernelModel,
    #[serde(default)]
    pub ringing: Option<Ringing>,
}

impl Default for ModulatorResponse {
    fn default() -> Self {
        Self { rise_time_10_90: DEFAULT_RISE_TIME, model_kind: KernelModel::FirstOrder, ringing: None }
    }
}

impl ModulatorResponse {
    pub fn validate(&self) -> Result<()> {
        if !(self.rise_time_10_90.is_finite() && self.rise_time_10_90 > 0.0) {
            return Err(Error::input("rise time must be positive"));
        }
        if let Some(r) = &self.ringing {
            if !(0.0..=0.2).contains(&r.relative_amplitude) {
                return Err(Error::input("ringing relative amplitude must lie in [0, 0.2]"));
            }
            if !(r.frequency > 0.0 && r.decay_time > 0.0) {
                return Err(Error::input("ringing frequency and decay time must be positive"));
            }
        }
        Ok(())
    }

    /// Time after an edge before the power is settled to ~1%.
    pub fn settle_time(&self) -> f64 {
        let ring = match &self.ringing {
            Some(r) if r.relative_amplitude > 0.01 => r.decay_time * (r.relative_amplitude / 0.01).ln(),
            _ => 0.0,
        };
        (3.0 * self.rise_time_10_90).max(ring)
    }

    /// Single-pole time constant with the configured 10–90% rise.
    pub fn time_constant(&self) -> f64 {
        self.rise_time_10_90 / 9f64.ln()
    }

    /// Standard deviation of the Gaussian impulse response with the
    /// configured 10–90% rise.
    pub fn gaussian_sigma(&self) -> f64 {
        // 10–90% of an erf step spans 2·Φ⁻¹(0.9)·σ.
        self.rise_time_10_90 / (2.0 * 1.281_551_565_544_600_4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    XSqueezed,
    PSqueezed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotTarget {
    Squeezed { squeezing_db: f64, quadrature: Quadrature },
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub target: SlotTarget,
}

/// A train of wave-packet slots, each `margin` of settling followed by a
/// `mode_width` measurement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainSpec {
    pub slots: Vec<Slot>,
    #[serde(default = "default_mode_width")]
    pub mode_width: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
}

fn default_mode_width() -> f64 {
    DEFAULT_MODE_WIDTH
}
fn default_margin() -> f64 {
    DEFAULT_MARGIN
}
fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}

impl PulseTrainSpec {
    pub fn new(targets: impl IntoIterator<Item = SlotTarget>) -> Self {
        Self {
            slots: targets.into_iter().map(|target| Slot { target }).collect(),
            mode_width: DEFAULT_MODE_WIDTH,
            margin: DEFAULT_MARGIN,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn period(&self) -> f64 {
        self.mode_width + self.margin
    }

    /// Centers of the measurement windows, relative to the AWG start.
    pub fn mode_centers(&self) -> Vec<f64> {
        (0..self.slots.len())
            .map(|k| k as f64 * self.period() + self.margin + self.mode_width / 2.0)
            .collect()
    }
}

fn slot_samples(period: f64, rate: f64) -> Result<usize> {
    let n = period * rate;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-6 {
        return Err(Error::input(format!("slot period {period} s is not a whole number of samples")));
    }
    Ok(rounded as usize)
}

/// Compiles a pulse-train spec into a staircase AWG program.
///
/// Each slot holds one voltage for its whole period. The step sits at the
/// slot start so the `margin` absorbs the modulator transient before the
/// mode window. Positive voltage squeezes x, negative squeezes p.
pub fn compile_pulse_train(
    spec: &PulseTrainSpec,
    cal: &Calibration,
    resp: &ModulatorResponse,
) -> Result<AwgProgram> {
    cal.validate()?;
    resp.validate()?;
    if spec.slots.is_empty() {
        return Err(Error::input("pulse train has no slots"));
    }
    if !(spec.mode_width > 0.0 && spec.margin >= 0.0) {
        return Err(Error::input("mode width must be positive and margin non-negative"));
    }
    let n_slot = slot_samples(spec.period(), spec.sample_rate_hz)?;
    let settle = resp.settle_time();
    let mut samples = Vec::with_capacity(n_slot * spec.slots.len());
    for (i, slot) in spec.slots.iter().enumerate() {
        let v = match slot.target {
            SlotTarget::Vacuum => 0.0,
            SlotTarget::Squeezed { squeezing_db, quadrature } => {
                if spec.margin < settle {
                    return Err(Error::Infeasible {
                        slot: i,
                        reason: format!(
                            "margin {} ns is shorter than the {} ns settling time (3x rise time)",
                            spec.margin * 1e9,
                            settle * 1e9
                        ),
                    });
                }
                let r = quantum::r_from_pure_db(squeezing_db)
                    .map_err(|e| Error::Infeasible { slot: i, reason: e.to_string() })?;
                let p = cal.power_for_r(r);
                if p > cal.max_pump_power * (1.0 + 1e-9) {
                    return Err(Error::Infeasible {
                        slot: i,
                        reason: format!(
                            "{squeezing_db} dB needs {p:.4} mW, above the {} mW pump ceiling",
                            cal.max_pump_power
                        ),
                    });
                }
                let mag = cal
                    .voltage_for_power(p)
                    .map_err(|e| Error::Infeasible { slot: i, reason: e.to_string() })?;
                match quadrature {
                    Quadrature::XSqueezed => mag,
                    Quadrature::PSqueezed => -mag,
                }
            }
        };
        samples.extend(std::iter::repeat_n(v, n_slot));
    }
    let prog = AwgProgram { sample_rate_hz: spec.sample_rate_hz, trigger_offset_s: 0.0, samples_v: samples };
    prog.validate(cal)?;
    Ok(prog)
}

/// Pump power (mW) and pump phase (0 or π) on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub dt: f64,
    pub power_mw: Vec<f64>,
    pub phase: Vec<f64>,
    /// Samples clamped to zero because the response model went negative.
    pub clamp_count: usize,
}

impl PowerTrace {
    pub fn len(&self) -> usize {
        self.power_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_mw.is_empty()
    }

    /// Power with the pump-phase sign folded in (π ↦ negative).
    pub fn signed(&self) -> Vec<f64> {
        self.power_mw
            .iter()
            .zip(&self.phase)
            .map(|(&p, &ph)| if ph > PI / 2.0 { -p } else { p })
            .collect()
    }

    pub fn to_csv(&self, t0: f64) -> String {
        let mut out = String::from("time_s,power_mw,phase_rad\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", t0 + i as f64 * self.dt, self.power_mw[i], self.phase[i]));
        }
        out
    }
}

/// Pointwise P = a·V² (LUT beyond the linear region), phase from the sign of V.
pub fn ideal_pump_power(prog: &AwgProgram, cal: &Calibration) -> Result<PowerTrace> {
    let power_mw = prog
        .samples_v
        .iter()
        .map(|v| cal.power_from_voltage(v.abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTrace { dt: prog.dt(), power_mw, phase: pump_phase_trace(prog), clamp_count: 0 })
}

/// 0 where V ≥ 0, π where V < 0.
pub fn pump_phase_trace(prog: &AwgProgram) -> Vec<f64> {
    prog.samples_v.iter().map(|&v| if v < 0.0 { PI } else { 0.0 }).collect()
}

/// Minimum samples per 10–90% rise accepted by [`apply_modulator_response`].
pub const MIN_SAMPLES_PER_RISE: f64 = 4.0;

/// Passes a pump trace through the modulator response.
///
/// The kernel acts on the signed power (phase π ↦ −P), which is linear and
/// has unit DC gain, so power integrals and rise times are preserved for
/// single-sign traces. A sign inversion becomes a smooth passage through
/// zero pump power, as the RF drive amplitude does when the AWG voltage
/// flips. Negative output after ringing is clamped to 0 and counted.
pub fn apply_modulator_response(trace: &PowerTrace, resp: &ModulatorResponse) -> Result<PowerTrace> {
    resp.validate()?;
    if trace.is_empty() || trace.phase.len() != trace.len() {
        return Err(Error::input("power trace is empty or power/phase lengths differ"));
    }
    if resp.rise_time_10_90 / trace.dt < MIN_SAMPLES_PER_RISE {
        return Err(Error::input(format!(
            "sample interval {} s cannot resolve a {} s rise (need >= {MIN_SAMPLES_PER_RISE} samples)",
            trace.dt, resp.rise_time_10_90
        )));
    }
    if trace.power_mw.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::input("power trace has negative or non-finite samples"));
    }
    let x = trace.signed();
    let y = match resp.model_kind {
        KernelModel::FirstOrder => first_order_response(&x, trace.dt, resp.time_constant()),
        KernelModel::Gaussian => gaussian_response(&x, trace.dt, resp.gaussian_sigma()),
    };
    let ring = match &resp.ringing {
        Some(r) if r.relative_amplitude > 0.0 => ringing(&trace.power_mw, trace.dt, r),
        _ => vec![0.0; y.len()],
    };
    let mut clamp_count = 0;
    let mut power_mw = Vec::with_capacity(y.len());
    let mut phase = Vec::with_capacity(y.len());
    for (v, w) in y.iter().zip(&ring) {
        let mut p = v.abs() + w;
        if p < 0.0 {
            clamp_count += 1;
            p = 0.0;
        }
        power_mw.push(p);
        phase.push(if *v < 0.0 { PI } else { 0.0 });
    }
    Ok(PowerTrace { dt: trace.dt, power_mw, phase, clamp_count: trace.clamp_count + clamp_count })
}

/// Exact single-pole response to the piecewise-linear interpolant of `x`,
/// starting in steady state at x[0].
fn first_order_response(x: &[f64], dt: f64, tau: f64) -> Vec<f64> {
    // For a linear ramp between samples, y' = (x − y)/τ integrates to
    // y[n] = a·y[n−1] + x[n] − a·x[n−1] − (1 − a)·τ/dt·(x[n] − x[n−1]).
    let a = (-dt / tau).exp();
    let c = (1.0 - a) * tau / dt;
    let mut y = Vec::with_capacity(x.len());
    let mut prev_y = x[0];
    let mut prev_x = x[0];
    for &xn in x {
        let yn = a * prev_y + xn - a * prev_x - c * (xn - prev_x);
        y.push(yn);
        prev_y = yn;
        prev_x = xn;
    }
    y
}

/// Causal Gaussian kernel delayed by 4σ and truncated to [0, 8σ].
fn gaussian_response(x: &[f64], dt: f64, sigma: f64) -> Vec<f64> {
    let delay = 4.0 * sigma;
    let len = (8.0 * sigma / dt).ceil() as usize + 1;
    let mut kernel: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 * dt - delay;
            (-0.5 * (t / sigma).powi(2)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= norm);
    let first = x[0];
    (0..x.len())
        .map(|n| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * if k <= n { x[n - k] } else { first })
                .sum()
        })
        .collect()
}

fn ringing(power: &[f64], dt: f64, r: &Ringing) -> Vec<f64> {
    let len = ((10.0 * r.decay_time) / dt).ceil() as usize;
    let kernel: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 * dt;
            r.relative_amplitude * (-t / r.decay_time).exp() * (2.0 * PI * r.frequency * t).sin()
        })
        .collect();
    let mut out = vec![0.0; power.len()];
    for n in 1..power.len() {
        let step = power[n] - power[n - 1];
        if step > 0.0 {
            for (k, w) in kernel.iter().enumerate() {
                match out.get_mut(n + k) {
                    Some(o) => *o += step * w,
                    None => break,
                }
            }
        }
    }
    out
}

/// 10–90% rise time of the first rising edge, linearly interpolated.
pub fn rise_time_10_90(samples: &[f64], dt: f64) -> Option<f64> {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let cross = |level: f64| -> Option<f64> {
        let th = lo + level * (hi - lo);
        samples.windows(2).enumerate().find_map(|(i, w)| {
            (w[0] < th && w[1] >= th).then(|| (i as f64 + (th - w[0]) / (w[1] - w[0])) * dt)
        })
    };
    Some(cross(0.9)? - cross(0.1)?)
}

/// AWG waveform builders for the pump-shaping demonstrations.
pub mod waveforms {
    use super::*;

    fn program(rate: f64, n: usize, f: impl Fn(f64) -> f64) -> AwgProgram {
        let dt = 1.0 / rate;
        AwgProgram {
            sample_rate_hz: rate,
            trigger_offset_s: 0.0,
            samples_v: (0..n).map(|i| f(i as f64 * dt)).collect(),
        }
    }

    /// Alternating +V / −V plateaus separated by zero-volt gaps.
    pub fn square(v: f64, plateau: f64, gap: f64, cycles: usize, rate: f64) -> AwgProgram {
        let period = 2.0 * (plateau + gap);
        let n = (cycles as f64 * period * rate).round() as usize;
        program(rate, n, |t| {
            let u = t % period;
            if u < plateau {
                v
            } else if u < plateau + gap {
                0.0
            } else if u < 2.0 * plateau + gap {
                -v
            } else {
                0.0
            }
        })
    }

    pub fn sine(v: f64, freq: f64, duration: f64, rate: f64) -> AwgProgram {
        let n = (duration * rate).round() as usize;
        program(rate, n, |t| v * (2.0 * PI * freq * t).sin())
    }

    /// Gaussian voltage pulses (FWHM in voltage) centered at `spacing`
    /// intervals, the first at `spacing / 2`.
    pub fn gaussian_pulses(v: f64, fwhms: &[f64], spacing: f64, rate: f64) -> AwgProgram {
        let n = (fwhms.len() as f64 * spacing * rate).round() as usize;
        program(rate, n, |t| {
            fwhms
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let c = (k as f64 + 0.5) * spacing;
                    v * (-4.0 * 2f64.ln() * ((t - c) / w).powi(2)).exp()
                })
                .sum()
        })
    }

    /// Piecewise-linear program through `(time_s, volts)` breakpoints.
    pub fn piecewise_linear(points: &[(f64, f64)], rate: f64) -> Result<AwgProgram> {
        if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::input("breakpoints must be >= 2 with increasing times"));
        }
        let end = points[points.len() - 1].0;
        let n = (end * rate).round() as usize + 1;
        Ok(program(rate, n, |t| interp(points, t, |p| p.0, |p| p.1)))
    }

    /// A free-form outline (two animal silhouettes) used as the arbitrary-
    /// waveform demonstration.
    pub fn silhouettes(v: f64, rate: f64) -> AwgProgram {
        let pts: Vec<(f64, f64)> = [
            (0.0, 0.0),
            (40.0, 0.0),
            (60.0, 0.55),
            (75.0, 0.95),
            (90.0, 0.6),
            (120.0, 0.65),
            (150.0, 0.6),
            (165.0, 0.95),
            (180.0, 0.55),
            (200.0, 0.3),
            (240.0, 0.25),
            (260.0, 0.0),
            (300.0, 0.0),
            (320.0, 0.4),
            (330.0, 1.0),
            (345.0, 0.45),
            (355.0, 1.0),
            (365.0, 0.4),
            (400.0, 0.5),
            (440.0, 0.45),
            (460.0, 0.2),
            (480.0, 0.0),
            (520.0, 0.0),
        ]
        .iter()
        .map(|&(t, a)| (t * 1e-9, a * v))
        .collect();
        piecewise_linear(&pts, rate).expect("static breakpoints are valid")
    }
}
