//! Technology-normalized power and area comparison of clock generators.
//!
//! Power is scaled by the square of the supply-voltage ratio and area by the
//! square of the feature-size ratio, both relative to a reference design:
//!
//! ```text
//! Power_norm = (P_x / P_ref) * (V_ref / V_x)^2
//! Area_norm  = (A_x / A_ref) * (node_ref / node_x)^2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Average power of the reference design, watts.
pub const AQR_POWER_WATTS: f64 = 22.64e-6;
pub const AQR_NODE_NM: f64 = 14.0;
pub const AQR_V_NOMINAL: f64 = 0.8;
pub const AQR_NAME: &str = "This Work";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub name: String,
    pub node_nm: f64,
    pub v_nominal: f64,
    pub power_watts: Option<f64>,
    /// Raw area, or transistor count used as an area proxy.
    pub area: Option<f64>,
}

impl ScalingEntry {
    pub fn validate(&self) -> Result<()> {
        if !(self.node_nm > 0.0 && self.node_nm.is_finite()) {
            return Err(Error::InvalidParams(format!("{}: node_nm must be positive", self.name)));
        }
        if !(self.v_nominal > 0.0 && self.v_nominal.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{}: v_nominal must be positive",
                self.name
            )));
        }
        if self.power_watts.is_some_and(|p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "{}: power must be non-negative",
                self.name
            )));
        }
        if self.area.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "{}: area must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    /// `"65nm (1.1V)"`.
    pub fn technology_label(&self) -> String {
        format!("{}nm ({}V)", self.node_nm, self.v_nominal)
    }
}

/// The reference design: 22.64 uW at 14 nm / 0.8 V, area expressed as its
/// 23-transistor count.
pub fn aqr_reference() -> ScalingEntry {
    ScalingEntry {
        name: AQR_NAME.to_string(),
        node_nm: AQR_NODE_NM,
        v_nominal: AQR_V_NOMINAL,
        power_watts: Some(AQR_POWER_WATTS),
        area: Some(AqrNetlist::default().transistor_count() as f64),
    }
}

/// `(V_ref / V_x)^2`.
pub fn voltage_factor(x: &ScalingEntry, reference: &ScalingEntry) -> f64 {
    (reference.v_nominal / x.v_nominal).powi(2)
}

/// `(node_ref / node_x)^2`.
pub fn node_factor(x: &ScalingEntry, reference: &ScalingEntry) -> f64 {
    (reference.node_nm / x.node_nm).powi(2)
}

pub fn power_norm(x: &ScalingEntry, reference: &ScalingEntry) -> Result<f64> {
    let px = x.power_watts.ok_or(Error::Missing("power of compared design"))?;
    let pr = reference
        .power_watts
        .ok_or(Error::Missing("power of reference design"))?;
    if pr <= 0.0 {
        return Err(Error::InvalidParams("reference power must be positive".into()));
    }
    Ok(px / pr * voltage_factor(x, reference))
}

pub fn area_norm(x: &ScalingEntry, reference: &ScalingEntry) -> Result<f64> {
    let ax = x.area.ok_or(Error::Missing("area of compared design"))?;
    let ar = reference.area.ok_or(Error::Missing("area of reference design"))?;
    if ar <= 0.0 {
        return Err(Error::InvalidParams("reference area must be positive".into()));
    }
    Ok(ax / ar * node_factor(x, reference))
}

/// One published comparison row: technology metadata plus the normalized
/// factors as printed. Raw competitor power and area are not available, so the
/// factors are the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub name: String,
    pub node_nm: f64,
    pub v_nominal: f64,
    pub power_factor: Option<f64>,
    pub area_factor: Option<f64>,
}

/// The bundled comparison table, reference row last.
pub fn published_table() -> Vec<PublishedRow> {
    let row = |name: &str, node_nm, v_nominal, p, a| PublishedRow {
        name: name.to_string(),
        node_nm,
        v_nominal,
        power_factor: p,
        area_factor: a,
    };
    vec![
        row("Lee2017", 65.0, 1.1, Some(1.0), Some(1.0)),
        row("Osama2016", 65.0, 1.1, Some(2.0), Some(21.0)),
        row("Bhatti2007", 90.0, 1.2, Some(2.0), Some(51.0)),
        row("Bellasi2014", 28.0, 1.0, Some(18.0), None),
        row(AQR_NAME, AQR_NODE_NM, AQR_V_NOMINAL, Some(1.0), Some(1.0)),
    ]
}

/// Raw values back-solved from published factors by inverting the
/// normalization. These are derived for display, not measured.
pub fn back_solve(row: &PublishedRow, reference: &ScalingEntry) -> Result<ScalingEntry> {
    let mut entry = ScalingEntry {
        name: row.name.clone(),
        node_nm: row.node_nm,
        v_nominal: row.v_nominal,
        power_watts: None,
        area: None,
    };
    entry.validate()?;
    if let Some(f) = row.power_factor {
        let pr = reference
            .power_watts
            .ok_or(Error::Missing("power of reference design"))?;
        entry.power_watts = Some(f * pr / voltage_factor(&entry, reference));
    }
    if let Some(f) = row.area_factor {
        let ar = reference.area.ok_or(Error::Missing("area of reference design"))?;
        entry.area = Some(f * ar / node_factor(&entry, reference));
    }
    Ok(entry)
}

/// Bundled rows converted to raw entries by [`back_solve`] against the
/// reference design. The reference row itself is returned with its own raw
/// values.
pub fn bundled_entries() -> Vec<ScalingEntry> {
    let reference = aqr_reference();
    published_table()
        .iter()
        .map(|row| {
            if row.name == AQR_NAME {
                reference.clone()
            } else {
                back_solve(row, &reference).expect("bundled rows are valid")
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub technology: String,
    pub power_norm: Option<f64>,
    pub area_norm: Option<f64>,
}

impl ReportRow {
    /// Factor rendered to one decimal with a trailing `x`, or `N/A`.
    pub fn format_factor(f: Option<f64>) -> String {
        match f {
            Some(v) => format!("{v:.1}x"),
            None => "N/A".to_string(),
        }
    }
}

/// Normalizes every entry against `reference`; missing raw data shows as N/A.
pub fn table_report(entries: &[ScalingEntry], reference: &ScalingEntry) -> Result<Vec<ReportRow>> {
    reference.validate()?;
    entries
        .iter()
        .map(|e| {
            e.validate()?;
            Ok(ReportRow {
                name: e.name.clone(),
                technology: e.technology_label(),
                power_norm: e.power_watts.map(|_| power_norm(e, reference)).transpose()?,
                area_norm: e.area.map(|_| area_norm(e, reference)).transpose()?,
            })
        })
        .collect()
}

/// Renders report rows as an aligned text table in the column order
/// Design, Technology, Power_norm, Area_norm.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Design", "Technology", "Power_norm", "Area_norm"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.technology.clone(),
                ReportRow::format_factor(r.power_norm),
                ReportRow::format_factor(r.area_norm),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |fields: [&str; 4]| {
        let parts: Vec<String> = fields.iter().zip(widths).map(|(f, w)| format!("{f:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header);
    for row in &cells {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    NmosPullDown,
    Inverter,
    DFlipFlop,
    Nand2,
}

impl ComponentKind {
    pub fn transistors(self) -> usize {
        match self {
            ComponentKind::NmosPullDown => 1,
            ComponentKind::Inverter => 2,
            ComponentKind::DFlipFlop => 16,
            ComponentKind::Nand2 => 4,
        }
    }
}

/// Transistor-level bill of materials of the clock generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AqrNetlist {
    pub components: Vec<ComponentKind>,
}

impl Default for AqrNetlist {
    fn default() -> Self {
        Self {
            components: vec![
                ComponentKind::NmosPullDown,
                ComponentKind::Inverter,
                ComponentKind::DFlipFlop,
                ComponentKind::Nand2,
            ],
        }
    }
}

impl AqrNetlist {
    pub fn transistor_count(&self) -> usize {
        self.components.iter().map(|c| c.transistors()).sum()
    }
}

pub fn transistor_count(netlist: &AqrNetlist) -> usize {
    netlist.transistor_count()
}
