//! TOML run configuration. Every dimensional key names its unit, unknown keys
//! are rejected, and [`RunConfig::validate`] runs before any computation.
//!
//! ```toml
//! [[device]]
//! label = "device B"
//! preset = "device_b"
//! [device.junction]
//! kind = "ssms"
//! l_j_nh = 0.200
//! c4_over_c2 = 1.9e-3
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbq::SeriesRlc;
use crate::constants::dbm_to_watts;
use crate::duffing::{DriveSpec, ModeParams};
use crate::hb::amplifier::AmpOptions;
use crate::hb::HbOptions;
use crate::junction::{JunctionModel, JunctionKind};
use crate::netlist::{
    Element, FrequencyGrid, KineticInductor, LumpedKind, Netlist, Placement, Termination,
    TlSegment, Topology,
};
use crate::pipeline::{Branch, DeviceSpec, PumpSearch};
use crate::presets;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid(msg.into()))
}

fn fifty() -> f64 {
    50.0
}

fn default_v_ph() -> f64 {
    presets::V_PH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, rename = "device")]
    pub devices: Vec<DeviceConfig>,
    pub grid: Option<GridConfig>,
    pub amplifier: Option<AmplifierConfig>,
    #[serde(default)]
    pub hb: HbConfig,
    pub mode: Option<ModeConfig>,
    pub drive: Option<DriveConfig>,
    pub iip3: Option<Iip3Config>,
    pub compare: Option<CompareConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    #[serde(default)]
    pub verbosity: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub label: String,
    /// `device_a` or `device_b`; replaces `topology` and `element`.
    pub preset: Option<String>,
    pub topology: Option<Topology>,
    #[serde(default = "fifty")]
    pub port_impedance_ohm: f64,
    #[serde(default)]
    pub termination: Termination,
    #[serde(default, rename = "element")]
    pub elements: Vec<ElementConfig>,
    pub junction: JunctionConfig,
    /// Series RLC used instead of the extraction from the netlist.
    pub pinned_rlc: Option<RlcConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementConfig {
    Line {
        z0_ohm: f64,
        length_um: f64,
        #[serde(default = "default_v_ph")]
        v_ph_m_per_s: f64,
        #[serde(default)]
        loss_np_per_m: f64,
    },
    Kinetic {
        squares: f64,
        l_sq_ph: f64,
    },
    Inductor {
        l_nh: f64,
        #[serde(default = "series")]
        placement: Placement,
    },
    Capacitor {
        c_ff: f64,
        #[serde(default = "series")]
        placement: Placement,
    },
    Resistor {
        r_ohm: f64,
        #[serde(default = "series")]
        placement: Placement,
    },
    Junction,
}

fn series() -> Placement {
    Placement::Series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionConfig {
    pub kind: JunctionKindConfig,
    pub l_j_nh: f64,
    /// Required for `ssms`.
    pub c4_over_c2: Option<f64>,
    /// Required for `koops`.
    pub tau_star: Option<f64>,
    /// L(I) fit domain as a fraction of the critical current.
    pub fit_fraction: Option<f64>,
    pub fit_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionKindConfig {
    Sis,
    Ssms,
    Koops,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlcConfig {
    pub l_nh: f64,
    pub c_pf: f64,
    pub r_ohm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub count: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { start_ghz: 2.0, stop_ghz: 12.0, count: 2001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    pub pump_freq_start_ghz: f64,
    pub pump_freq_stop_ghz: f64,
    #[serde(default = "grid_41")]
    pub pump_freq_count: usize,
    pub pump_power_start_dbm: f64,
    pub pump_power_stop_dbm: f64,
    #[serde(default = "grid_41")]
    pub pump_power_count: usize,
    #[serde(default = "truncation")]
    pub truncation: usize,
    #[serde(default = "probe_power_dbm")]
    pub probe_power_dbm: f64,
    #[serde(default = "probe_offset_khz")]
    pub probe_offset_khz: f64,
    #[serde(default = "gain_window")]
    pub gain_window_db: [f64; 2],
    #[serde(default = "p1db_start")]
    pub p1db_start_dbm: f64,
    #[serde(default = "p1db_stop")]
    pub p1db_stop_dbm: f64,
    #[serde(default = "p1db_step")]
    pub p1db_step_db: f64,
    /// Fixed pump condition for the `p1db` subcommand.
    pub pump_freq_ghz: Option<f64>,
    pub pump_power_dbm: Option<f64>,
}

fn grid_41() -> usize {
    41
}
fn truncation() -> usize {
    crate::hb::DEFAULT_TRUNCATION
}
fn probe_power_dbm() -> f64 {
    -180.0
}
fn probe_offset_khz() -> f64 {
    10.0
}
fn gain_window() -> [f64; 2] {
    [20.0, 22.0]
}
fn p1db_start() -> f64 {
    -175.0
}
fn p1db_stop() -> f64 {
    -90.0
}
fn p1db_step() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbConfig {
    #[serde(default = "tolerance_a")]
    pub tolerance_a: f64,
    #[serde(default = "relative_tolerance")]
    pub relative_tolerance: f64,
    #[serde(default = "max_iterations")]
    pub max_iterations: usize,
}

fn tolerance_a() -> f64 {
    HbOptions::default().tolerance
}
fn relative_tolerance() -> f64 {
    HbOptions::default().relative_tolerance
}
fn max_iterations() -> usize {
    HbOptions::default().max_iterations
}

impl Default for HbConfig {
    fn default() -> Self {
        Self {
            tolerance_a: tolerance_a(),
            relative_tolerance: relative_tolerance(),
            max_iterations: max_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub f_r_ghz: f64,
    pub kappa_mhz: f64,
    pub kappa_ext_mhz: f64,
    #[serde(default)]
    pub kerr_hz: f64,
    pub topology: Topology,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub power_dbm: f64,
    pub freq_ghz: f64,
    #[serde(default)]
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Iip3Config {
    pub f1_ghz: f64,
    pub f2_ghz: f64,
    pub powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Label of the device whose netlist every branch shares.
    pub device: String,
    #[serde(rename = "branch")]
    pub branches: Vec<BranchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub label: String,
    pub junction: JunctionConfig,
    pub pump_power_start_dbm: f64,
    pub pump_power_stop_dbm: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} = {v} must be > 0"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite"))
    }
}

impl JunctionConfig {
    pub fn model(&self) -> Result<JunctionModel> {
        positive("junction.l_j_nh", self.l_j_nh)?;
        let l_j = self.l_j_nh * 1e-9;
        let model = match self.kind {
            JunctionKindConfig::Sis => {
                if self.c4_over_c2.is_some_and(|c| c != 1.0) || self.tau_star.is_some() {
                    return invalid("sis junctions take neither c4_over_c2 (fixed at 1) nor tau_star");
                }
                JunctionModel::sis(l_j)
            }
            JunctionKindConfig::Ssms => {
                let Some(c4) = self.c4_over_c2 else {
                    return invalid("ssms junction needs c4_over_c2");
                };
                if self.tau_star.is_some() {
                    return invalid("ssms junction does not take tau_star");
                }
                JunctionModel::ssms(l_j, 1.0, c4)
            }
            JunctionKindConfig::Koops => {
                let Some(tau) = self.tau_star else {
                    return invalid("koops junction needs tau_star");
                };
                if self.c4_over_c2.is_some() {
                    return invalid("koops junction derives c4_over_c2 from tau_star");
                }
                JunctionModel::koops(l_j, tau)
            }
        };
        let model = model.map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(f) = self.fit_fraction {
            if !(f > 0.0 && f < 1.0) {
                return invalid(format!("fit_fraction {f} must lie in (0, 1)"));
            }
        }
        if let Some(o) = self.fit_order {
            if !(2..=24).contains(&o) {
                return invalid(format!("fit_order {o} must lie in 2..=24"));
            }
        }
        Ok(model)
    }

    pub fn fit_fraction_or_default(&self, model: &JunctionModel) -> f64 {
        self.fit_fraction.unwrap_or_else(|| presets::fit_fraction(model))
    }

    pub fn fit_order_or_default(&self) -> usize {
        self.fit_order.unwrap_or(presets::AMPLIFIER_FIT_ORDER)
    }

    pub fn polynomial(&self) -> Result<crate::junction::InductancePolynomial> {
        let model = self.model()?;
        if model.kind == JunctionKind::SsmsQuartic && model.c4 == 0.0 {
            return Ok(crate::junction::InductancePolynomial::linear(model.l_j, 1.0));
        }
        crate::junction::fit_inductance_polynomial(
            &model,
            self.fit_fraction_or_default(&model) * model.critical_current(),
            self.fit_order_or_default(),
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

impl ElementConfig {
    fn build(&self, l_j: f64) -> Result<Element> {
        Ok(match *self {
            ElementConfig::Line { z0_ohm, length_um, v_ph_m_per_s, loss_np_per_m } => {
                Element::Line(TlSegment {
                    z0: z0_ohm,
                    length: length_um * 1e-6,
                    v_ph: v_ph_m_per_s,
                    loss: loss_np_per_m,
                })
            }
            ElementConfig::Kinetic { squares, l_sq_ph } => {
                Element::Kinetic(KineticInductor { length_squares: squares, l_sq: l_sq_ph * 1e-12 })
            }
            ElementConfig::Inductor { l_nh, placement } => {
                Element::Lumped { kind: LumpedKind::Inductor, placement, value: l_nh * 1e-9 }
            }
            ElementConfig::Capacitor { c_ff, placement } => {
                Element::Lumped { kind: LumpedKind::Capacitor, placement, value: c_ff * 1e-15 }
            }
            ElementConfig::Resistor { r_ohm, placement } => {
                Element::Lumped { kind: LumpedKind::Resistor, placement, value: r_ohm }
            }
            ElementConfig::Junction => Element::Junction { l_j },
        })
    }
}

impl DeviceConfig {
    pub fn netlist(&self) -> Result<Netlist> {
        let l_j = self.junction.l_j_nh * 1e-9;
        let net = match self.preset.as_deref() {
            Some(name) => {
                if !self.elements.is_empty() || self.topology.is_some() {
                    return invalid(format!(
                        "device {:?}: preset excludes explicit topology and elements",
                        self.label
                    ));
                }
                let net = match name {
                    "device_a" => presets::device_a(),
                    "device_b" => presets::device_b(),
                    other => return invalid(format!("unknown preset {other:?}")),
                };
                net.map_err(|e| ConfigError::Invalid(e.to_string()))?.with_junction_inductance(l_j)
            }
            None => {
                let Some(topology) = self.topology else {
                    return invalid(format!("device {:?} needs a topology or a preset", self.label));
                };
                let elements =
                    self.elements.iter().map(|e| e.build(l_j)).collect::<Result<Vec<_>>>()?;
                Netlist::new(elements, topology, self.port_impedance_ohm)
                    .map_err(|e| ConfigError::Invalid(format!("device {:?}: {e}", self.label)))?
                    .with_termination(self.termination)
            }
        };
        net.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(net)
    }

    pub fn spec(&self, grid: &GridConfig) -> Result<DeviceSpec> {
        let junction = self.junction.model()?;
        let pinned = match self.pinned_rlc {
            Some(r) => {
                positive("pinned_rlc.l_nh", r.l_nh)?;
                positive("pinned_rlc.c_pf", r.c_pf)?;
                if !(r.r_ohm.is_finite() && r.r_ohm >= 0.0) {
                    return invalid("pinned_rlc.r_ohm must be >= 0");
                }
                let (l, c) = (r.l_nh * 1e-9, r.c_pf * 1e-12);
                Some(SeriesRlc { omega0: 1.0 / (l * c).sqrt(), l, c, r: r.r_ohm })
            }
            None => None,
        };
        Ok(DeviceSpec {
            label: self.label.clone(),
            netlist: self.netlist()?,
            junction,
            pinned_rlc: pinned,
            grid: grid.build()?,
        })
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.start_ghz * 1e9, self.stop_ghz * 1e9, self.count)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn axis(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect()
}

impl AmplifierConfig {
    pub fn options(&self, hb: &HbConfig) -> AmpOptions {
        AmpOptions {
            truncation: self.truncation,
            probe_power: dbm_to_watts(self.probe_power_dbm),
            probe_offset: self.probe_offset_khz * 1e3,
            hb: hb.options(),
            ..AmpOptions::default()
        }
    }

    pub fn pump_frequencies(&self) -> Vec<f64> {
        axis(self.pump_freq_start_ghz * 1e9, self.pump_freq_stop_ghz * 1e9, self.pump_freq_count)
    }

    pub fn pump_powers_dbm(&self, start: f64, stop: f64) -> Vec<f64> {
        axis(start, stop, self.pump_power_count)
    }

    pub fn p1db_sweep(&self) -> Vec<f64> {
        let n = ((self.p1db_stop_dbm - self.p1db_start_dbm) / self.p1db_step_db).floor() as usize + 1;
        (0..n).map(|k| dbm_to_watts(self.p1db_start_dbm + self.p1db_step_db * k as f64)).collect()
    }

    pub fn search(&self, power_start_dbm: f64, power_stop_dbm: f64) -> PumpSearch {
        PumpSearch {
            frequencies: self.pump_frequencies(),
            powers: self
                .pump_powers_dbm(power_start_dbm, power_stop_dbm)
                .into_iter()
                .map(dbm_to_watts)
                .collect(),
            gain_window_db: self.gain_window_db,
            probe_sweep: self.p1db_sweep(),
        }
    }

    fn validate(&self) -> Result<()> {
        positive("amplifier.pump_freq_start_ghz", self.pump_freq_start_ghz)?;
        if !(self.pump_freq_stop_ghz > self.pump_freq_start_ghz) || self.pump_freq_count < 2 {
            return invalid("amplifier pump frequency axis needs stop > start and count >= 2");
        }
        finite("amplifier.pump_power_start_dbm", self.pump_power_start_dbm)?;
        if !(self.pump_power_stop_dbm > self.pump_power_start_dbm) || self.pump_power_count < 2 {
            return invalid("amplifier pump power axis needs stop > start and count >= 2");
        }
        if self.truncation < 3 {
            return invalid("amplifier.truncation must be >= 3");
        }
        finite("amplifier.probe_power_dbm", self.probe_power_dbm)?;
        positive("amplifier.probe_offset_khz", self.probe_offset_khz)?;
        let [lo, hi] = self.gain_window_db;
        if !(lo.is_finite() && hi > lo) {
            return invalid("amplifier.gain_window_db must be [low, high] with high > low");
        }
        positive("amplifier.p1db_step_db", self.p1db_step_db)?;
        if !(self.p1db_stop_dbm > self.p1db_start_dbm) {
            return invalid("amplifier p1db sweep needs stop > start");
        }
        if let Some(f) = self.pump_freq_ghz {
            positive("amplifier.pump_freq_ghz", f)?;
        }
        if let Some(p) = self.pump_power_dbm {
            finite("amplifier.pump_power_dbm", p)?;
        }
        Ok(())
    }
}

impl HbConfig {
    pub fn options(&self) -> HbOptions {
        HbOptions {
            tolerance: self.tolerance_a,
            relative_tolerance: self.relative_tolerance,
            max_iterations: self.max_iterations,
            ..HbOptions::default()
        }
    }
}

impl ModeConfig {
    pub fn params(&self) -> ModeParams {
        let two_pi = 2.0 * std::f64::consts::PI;
        ModeParams {
            f_r: self.f_r_ghz * 1e9,
            kappa: two_pi * self.kappa_mhz * 1e6,
            kappa_ext: two_pi * self.kappa_ext_mhz * 1e6,
            kerr: self.kerr_hz,
            topology: self.topology,
        }
    }
}

impl DriveConfig {
    pub fn spec(&self) -> DriveSpec {
        DriveSpec {
            p_g: dbm_to_watts(self.power_dbm),
            f_d: self.freq_ghz * 1e9,
            attenuation: 10f64.powf(self.attenuation_db / 10.0),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> GridConfig {
        self.grid.unwrap_or_default()
    }

    pub fn device(&self, label: Option<&str>) -> Result<&DeviceConfig> {
        match label {
            Some(l) => self
                .devices
                .iter()
                .find(|d| d.label == l)
                .ok_or_else(|| ConfigError::Invalid(format!("no device labelled {l:?}"))),
            None => match self.devices.as_slice() {
                [d] => Ok(d),
                [] => invalid("config defines no device"),
                _ => invalid("config defines several devices; choose one with --device"),
            },
        }
    }

    pub fn branches(&self) -> Result<Vec<Branch>> {
        let Some(cmp) = &self.compare else {
            return invalid("config has no [compare] section");
        };
        let Some(amp) = &self.amplifier else {
            return invalid("compare needs an [amplifier] section");
        };
        cmp.branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    label: b.label.clone(),
                    junction: b.junction.model()?,
                    polynomial: b.junction.polynomial()?,
                    search: amp.search(b.pump_power_start_dbm, b.pump_power_stop_dbm),
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut labels = HashSet::new();
        for d in &self.devices {
            if d.label.trim().is_empty() {
                return invalid("device label must not be empty");
            }
            if !labels.insert(d.label.as_str()) {
                return invalid(format!("duplicate device label {:?}", d.label));
            }
            positive("port_impedance_ohm", d.port_impedance_ohm)?;
            d.junction.model()?;
            d.netlist()?;
            let junctions = d.elements.iter().filter(|e| matches!(e, ElementConfig::Junction)).count();
            if d.preset.is_none() && junctions != 1 {
                return invalid(format!("device {:?} needs exactly one junction element", d.label));
            }
        }
        let grid = self.grid();
        grid.build()?;
        if let Some(a) = &self.amplifier {
            a.validate()?;
        }
        positive("hb.tolerance_a", self.hb.tolerance_a)?;
        positive("hb.relative_tolerance", self.hb.relative_tolerance)?;
        if self.hb.max_iterations == 0 {
            return invalid("hb.max_iterations must be > 0");
        }
        if let Some(m) = &self.mode {
            m.params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(d) = &self.drive {
            if !(d.attenuation_db >= 0.0) {
                return invalid("drive.attenuation_db must be >= 0");
            }
            d.spec().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(t) = &self.iip3 {
            positive("iip3.f1_ghz", t.f1_ghz)?;
            positive("iip3.f2_ghz", t.f2_ghz)?;
            if t.f1_ghz == t.f2_ghz || t.powers_dbm.len() < 2 {
                return invalid("iip3 needs two distinct tones and at least two powers");
            }
            if t.powers_dbm.iter().any(|p| !p.is_finite()) {
                return invalid("iip3.powers_dbm must be finite");
            }
        }
        if let Some(c) = &self.compare {
            self.device(Some(&c.device))?;
            if c.branches.len() < 2 {
                return invalid("compare needs at least two branches");
            }
            for b in &c.branches {
                b.junction.model()?;
                if !(b.pump_power_stop_dbm > b.pump_power_start_dbm) {
                    return invalid(format!("branch {:?}: pump power stop must exceed start", b.label));
                }
            }
            if self.amplifier.is_none() {
                return invalid("compare needs an [amplifier] section");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEVICE_B: &str = r#"
[[device]]
label = "B"
preset = "device_b"
[device.junction]
kind = "ssms"
l_j_nh = 0.2
c4_over_c2 = 1.9e-3
[device.pinned_rlc]
l_nh = 1.623
c_pf = 0.474
r_ohm = 0.541
"#;

    #[test]
    fn preset_device_parses() {
        let cfg = RunConfig::from_toml_str(DEVICE_B).unwrap();
        let spec = cfg.devices[0].spec(&cfg.grid()).unwrap();
        assert_eq!(spec.netlist.topology, Topology::Hanger);
        assert!((spec.pinned_rlc.unwrap().l - 1.623e-9).abs() < 1e-20);
    }

    #[test]
    fn explicit_elements_with_units() {
        let text = r#"
[[device]]
label = "rlc"
topology = "reflection"
[[device.element]]
kind = "capacitor"
c_ff = 40
[[device.element]]
kind = "line"
z0_ohm = 25
length_um = 2890
[[device.element]]
kind = "junction"
[device.junction]
kind = "sis"
l_j_nh = 0.205
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let net = cfg.devices[0].netlist().unwrap();
        assert_eq!(net.elements.len(), 3);
        match net.elements[1] {
            Element::Line(s) => {
                assert!((s.length - 2.89e-3).abs() < 1e-15);
                assert_eq!(s.v_ph, presets::V_PH);
            }
            _ => panic!(),
        }
        assert_eq!(net.junction_inductance(), 0.205e-9);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DEVICE_B.replace("l_j_nh = 0.2", "l_j_nh = 0.2\nl_j = 2e-10");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(ConfigError::Parse(_))));
        let bad_elem = r#"
[[device]]
label = "x"
topology = "reflection"
[[device.element]]
kind = "line"
z0_ohm = 25
length_mm = 3
[[device.element]]
kind = "junction"
[device.junction]
kind = "sis"
l_j_nh = 0.2
"#;
        assert!(RunConfig::from_toml_str(bad_elem).is_err());
        assert!(RunConfig::from_toml_str("[outptu]\ndir = \"x\"\n").is_err());
    }

    #[test]
    fn semantic_checks() {
        let missing_c4 = DEVICE_B.replace("c4_over_c2 = 1.9e-3", "");
        assert!(matches!(RunConfig::from_toml_str(&missing_c4), Err(ConfigError::Invalid(_))));
        let neg = DEVICE_B.replace("l_j_nh = 0.2", "l_j_nh = -0.2");
        assert!(RunConfig::from_toml_str(&neg).is_err());
        let dup = format!("{DEVICE_B}{DEVICE_B}");
        assert!(RunConfig::from_toml_str(&dup).is_err());
        let two_junctions = r#"
[[device]]
label = "x"
topology = "reflection"
[[device.element]]
kind = "junction"
[[device.element]]
kind = "junction"
[device.junction]
kind = "sis"
l_j_nh = 0.2
"#;
        assert!(RunConfig::from_toml_str(two_junctions).is_err());
    }

    #[test]
    fn amplifier_defaults() {
        let text = format!(
            "{DEVICE_B}\n[amplifier]\npump_freq_start_ghz = 7.44\npump_freq_stop_ghz = 7.48\npump_power_start_dbm = -95\npump_power_stop_dbm = -80\n"
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let a = cfg.amplifier.as_ref().unwrap();
        assert_eq!(a.pump_freq_count, 41);
        assert_eq!(a.pump_power_count, 41);
        assert_eq!(a.gain_window_db, [20.0, 22.0]);
        let s = a.search(-95.0, -80.0);
        assert_eq!(s.frequencies.len(), 41);
        assert!((s.frequencies[40] - 7.48e9).abs() < 1.0);
        assert!((a.p1db_sweep().len() as f64 - 171.0).abs() < 0.5);
    }
}
