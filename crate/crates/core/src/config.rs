//! TOML run configuration: file layout, defaults, overrides, validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::ahp::{Criterion, ZonalMethod, CRITERIA};
use crate::error::{Error, Result};
use crate::hydro::SteadyWaterParams;
use crate::rating::RatingScheme;
use crate::watershed::{DelineationConfig, DelineationMethod};

/// Saaty's scale bounds for judgment entries.
const JUDGMENT_MIN: f64 = 1.0 / 9.0;
const JUDGMENT_MAX: f64 = 9.0;
const JUDGMENT_SLACK: f64 = 1e-9;

/// A number that may be written as an integer, a float, or a rational string
/// like "1/3". Used for judgment entries and anywhere exact thirds and ninths
/// are more natural than decimal approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rational(pub f64);

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RationalVisitor;
        impl<'de> Visitor<'de> for RationalVisitor {
            type Value = Rational;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a rational string like \"1/3\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rational, E> {
                Ok(Rational(v as f64))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Rational, E> {
                Ok(Rational(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
                parse_rational(v).ok_or_else(|| E::custom(format!("bad rational {v:?}")))
            }
        }
        deserializer.deserialize_any(RationalVisitor)
    }
}

fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 || !num.is_finite() || !den.is_finite() {
            return None;
        }
        Some(Rational(num / den))
    } else {
        text.parse().ok().map(Rational)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub dem: PathBuf,
    pub water_mask: Option<PathBuf>,
    pub landuse: Option<PathBuf>,
    pub hydrolith: Option<PathBuf>,
    pub flooded_mask: Option<PathBuf>,
    pub dry_mask: Option<PathBuf>,
    pub normal_water_mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroSection {
    pub swi_min: f64,
    pub swi_max: f64,
    pub min_area_cells: usize,
    pub burn_depth: f64,
}

impl Default for HydroSection {
    fn default() -> Self {
        let p = SteadyWaterParams::default();
        HydroSection {
            swi_min: p.swi_min,
            swi_max: p.swi_max,
            min_area_cells: p.min_area_cells,
            burn_depth: 10.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingSection {
    pub stream_threshold_cells: u64,
    pub pit_fill: bool,
}

impl Default for RoutingSection {
    fn default() -> Self {
        RoutingSection {
            stream_threshold_cells: 100,
            pit_fill: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelineationSection {
    pub method: String,
    pub area_threshold_ha: f64,
}

impl Default for DelineationSection {
    fn default() -> Self {
        DelineationSection {
            method: "d8".into(),
            area_threshold_ha: 66.7,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub statistic: String,
    pub constrained: Vec<String>,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        ConstraintSection {
            statistic: "maximum".into(),
            constrained: vec!["slope".into(), "distance_from_streams".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgmentSection {
    pub matrix: Vec<Vec<Rational>>,
}

impl Default for JudgmentSection {
    fn default() -> Self {
        let r = |v: f64| Rational(v);
        JudgmentSection {
            matrix: vec![
                vec![r(1.0), r(4.0), r(0.5), r(3.0), r(0.5)],
                vec![r(0.25), r(1.0), r(1.0 / 3.0), r(0.5), r(0.25)],
                vec![r(2.0), r(3.0), r(1.0), r(3.0), r(1.0)],
                vec![r(1.0 / 3.0), r(2.0), r(1.0 / 3.0), r(1.0), r(1.0 / 3.0)],
                vec![r(2.0), r(4.0), r(1.0), r(3.0), r(1.0)],
            ],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatingSection {
    /// Numeric criteria whose class breaks are re-derived from the data by
    /// natural breaks instead of the built-in tables. Only "slope" and
    /// "elevation" qualify.
    pub recompute: Vec<String>,
    pub slope_breaks: Option<Vec<(Rational, i64)>>,
    pub elevation_breaks: Option<Vec<(Rational, i64)>>,
    pub landuse_classes: Option<Vec<(i64, i64)>>,
    pub hydrolith_classes: Option<Vec<(i64, i64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

/// Axes for batch comparison runs. Every combination of the three lists is
/// executed against the shared inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixSection {
    pub methods: Vec<String>,
    pub statistics: Vec<String>,
    pub thresholds_ha: Vec<Rational>,
}

impl Default for MatrixSection {
    fn default() -> Self {
        MatrixSection {
            methods: vec!["d8".into()],
            statistics: vec!["maximum".into(), "median".into(), "majority".into()],
            thresholds_ha: [66.7, 200.0, 667.0, 2000.0, 3333.0, 6667.0]
                .into_iter()
                .map(Rational)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub hydro: HydroSection,
    #[serde(default)]
    pub routing: RoutingSection,
    #[serde(default)]
    pub delineation: DelineationSection,
    #[serde(default)]
    pub constraint: ConstraintSection,
    #[serde(default)]
    pub judgment: JudgmentSection,
    #[serde(default)]
    pub rating: RatingSection,
    #[serde(default)]
    pub output: OutputSection,
    pub matrix: Option<MatrixSection>,
}

impl PipelineConfig {
    /// Loads, applies `--set`-style overrides, and validates.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse: {e}")))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("config shape: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.check_paths_distinct()?;
        let h = &self.hydro;
        if !(h.swi_min.is_finite() && h.swi_max.is_finite() && h.swi_min <= h.swi_max) {
            return Err(Error::Config(format!(
                "hydro.swi_min ({}) must be finite and <= hydro.swi_max ({})",
                h.swi_min, h.swi_max
            )));
        }
        if !(h.burn_depth.is_finite() && h.burn_depth >= 0.0) {
            return Err(Error::Config(format!(
                "hydro.burn_depth must be finite and >= 0, got {}",
                h.burn_depth
            )));
        }
        if self.routing.stream_threshold_cells == 0 {
            return Err(Error::Config(
                "routing.stream_threshold_cells must be >= 1".into(),
            ));
        }
        self.delineation_config()?;
        self.statistic()?;
        self.constrained_criteria()?;
        self.judgment_matrix()?;
        self.scheme_overrides()?;
        if let Some(matrix) = &self.matrix {
            if matrix.methods.is_empty()
                || matrix.statistics.is_empty()
                || matrix.thresholds_ha.is_empty()
            {
                return Err(Error::Config("matrix axes must be nonempty".into()));
            }
            for m in &matrix.methods {
                parse_method(m)?;
            }
            for s in &matrix.statistics {
                parse_statistic(s)?;
            }
            for &Rational(t) in &matrix.thresholds_ha {
                check_threshold(t)?;
            }
        }
        Ok(())
    }

    fn check_paths_distinct(&self) -> Result<()> {
        let i = &self.inputs;
        let named: [(&str, Option<&PathBuf>); 7] = [
            ("dem", Some(&i.dem)),
            ("water_mask", i.water_mask.as_ref()),
            ("landuse", i.landuse.as_ref()),
            ("hydrolith", i.hydrolith.as_ref()),
            ("flooded_mask", i.flooded_mask.as_ref()),
            ("dry_mask", i.dry_mask.as_ref()),
            ("normal_water_mask", i.normal_water_mask.as_ref()),
        ];
        let mut seen: Vec<(&str, &PathBuf)> = Vec::new();
        for (name, path) in named.into_iter() {
            let Some(path) = path else { continue };
            if let Some((prior, _)) = seen.iter().find(|(_, p)| *p == path) {
                return Err(Error::Config(format!(
                    "inputs.{name} and inputs.{prior} point at the same file {}",
                    path.display()
                )));
            }
            seen.push((name, path));
        }
        Ok(())
    }

    pub fn steady_water_params(&self) -> SteadyWaterParams {
        SteadyWaterParams {
            swi_min: self.hydro.swi_min,
            swi_max: self.hydro.swi_max,
            min_area_cells: self.hydro.min_area_cells,
        }
    }

    pub fn delineation_config(&self) -> Result<DelineationConfig> {
        check_threshold(self.delineation.area_threshold_ha)?;
        Ok(DelineationConfig {
            method: parse_method(&self.delineation.method)?,
            area_threshold_ha: self.delineation.area_threshold_ha,
            pit_fill: self.routing.pit_fill,
        })
    }

    pub fn statistic(&self) -> Result<ZonalMethod> {
        parse_statistic(&self.constraint.statistic)
    }

    pub fn constrained_criteria(&self) -> Result<BTreeSet<Criterion>> {
        let mut set = BTreeSet::new();
        for name in &self.constraint.constrained {
            let criterion = Criterion::from_name(name)?;
            if !set.insert(criterion) {
                return Err(Error::Config(format!(
                    "constraint.constrained lists {name:?} twice"
                )));
            }
        }
        Ok(set)
    }

    /// Judgment matrix as plain numbers, with every entry checked against
    /// Saaty's 1/9..9 scale. Reciprocity is enforced downstream.
    pub fn judgment_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let n = CRITERIA.len();
        let m = &self.judgment.matrix;
        if m.len() != n || m.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!(
                "judgment.matrix must be {n}x{n} to match the criteria"
            )));
        }
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in m.iter().enumerate() {
            for (j, &Rational(v)) in row.iter().enumerate() {
                let scale = JUDGMENT_MIN - JUDGMENT_SLACK..=JUDGMENT_MAX + JUDGMENT_SLACK;
                if !v.is_finite() || !scale.contains(&v) {
                    return Err(Error::Config(format!(
                        "judgment.matrix[{i}][{j}] = {v} outside the 1/9..9 scale"
                    )));
                }
                out[i][j] = v;
            }
        }
        Ok(out)
    }

    /// Criteria whose numeric breaks should be re-derived from the data.
    pub fn recompute_set(&self) -> Result<BTreeSet<Criterion>> {
        let mut set = BTreeSet::new();
        for name in &self.rating.recompute {
            let criterion = Criterion::from_name(name)?;
            if !matches!(criterion, Criterion::Slope | Criterion::Elevation) {
                return Err(Error::Config(format!(
                    "rating.recompute only applies to numeric criteria, not {name:?}"
                )));
            }
            if !set.insert(criterion) {
                return Err(Error::Config(format!(
                    "rating.recompute lists {name:?} twice"
                )));
            }
        }
        Ok(set)
    }

    /// Explicit scheme overrides, already validated. `None` means "use the
    /// built-in table" (or recompute, where requested).
    pub fn scheme_overrides(&self) -> Result<SchemeOverrides> {
        self.recompute_set()?;
        let numeric =
            |name: &str, given: &Option<Vec<(Rational, i64)>>| -> Result<Option<RatingScheme>> {
                let Some(pairs) = given else { return Ok(None) };
                let breaks = pairs
                    .iter()
                    .map(|&(Rational(bound), rating)| Ok((bound, rating_u8(name, rating)?)))
                    .collect::<Result<Vec<_>>>()?;
                RatingScheme::numeric(breaks).map(Some)
            };
        let categorical =
            |name: &str, given: &Option<Vec<(i64, i64)>>| -> Result<Option<RatingScheme>> {
                let Some(pairs) = given else { return Ok(None) };
                let classes = pairs
                    .iter()
                    .map(|&(code, rating)| Ok((code, rating_u8(name, rating)?)))
                    .collect::<Result<Vec<_>>>()?;
                RatingScheme::categorical(classes).map(Some)
            };
        Ok(SchemeOverrides {
            slope: numeric("rating.slope_breaks", &self.rating.slope_breaks)?,
            elevation: numeric("rating.elevation_breaks", &self.rating.elevation_breaks)?,
            landuse: categorical("rating.landuse_classes", &self.rating.landuse_classes)?,
            hydrolith: categorical("rating.hydrolith_classes", &self.rating.hydrolith_classes)?,
        })
    }
}

/// Resolved per-criterion scheme overrides from the `[rating]` section.
#[derive(Debug, Clone, Default)]
pub struct SchemeOverrides {
    pub slope: Option<RatingScheme>,
    pub elevation: Option<RatingScheme>,
    pub landuse: Option<RatingScheme>,
    pub hydrolith: Option<RatingScheme>,
}

fn rating_u8(context: &str, rating: i64) -> Result<u8> {
    if (0..=5).contains(&rating) {
        Ok(rating as u8)
    } else {
        Err(Error::Config(format!(
            "{context}: rating {rating} outside 0..=5"
        )))
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "area threshold must be a positive number of hectares, got {t}"
        )))
    }
}

pub fn parse_method(name: &str) -> Result<DelineationMethod> {
    match name {
        "d8" => Ok(DelineationMethod::D8),
        "mfd" => Ok(DelineationMethod::Mfd),
        other => Err(Error::Config(format!(
            "unknown delineation method {other:?} (expected \"d8\" or \"mfd\")"
        ))),
    }
}

pub fn parse_statistic(name: &str) -> Result<ZonalMethod> {
    ZonalMethod::from_name(name)
}

/// Applies one `key.path=value` override to the parsed tree. The value is
/// parsed as a TOML literal; if that fails it is taken as a bare string.
fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override {key:?} descends into a non-table value"))
        })?;
    }
    table.insert(
        parts[parts.len() - 1].to_string(),
        parse_override_value(raw),
    );
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped: std::result::Result<toml::Table, _> = format!("v = {raw}").parse();
    match wrapped {
        Ok(mut table) => table.remove("v").expect("key v was just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
