//! Scenario/weather grouped evaluation and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MetricAccumulator, MetricError, MetricTriple};
use crate::scene::{SceneKind, Weather};

/// Clear versus any other weather.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Clear,
    Adverse,
}

impl From<Weather> for Condition {
    fn from(w: Weather) -> Self {
        if w.is_adverse() {
            Condition::Adverse
        } else {
            Condition::Clear
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    All,
    Scene,
    Weather,
    SceneWeather,
    /// Scene crossed with clear/adverse.
    SceneCondition,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "all" => GroupBy::All,
            "scene" => GroupBy::Scene,
            "weather" => GroupBy::Weather,
            "scene_weather" | "scene×weather" | "scenexweather" => GroupBy::SceneWeather,
            "scene_condition" => GroupBy::SceneCondition,
            _ => return Err(format!("unknown grouping `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weather: Option<Weather>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

impl GroupKey {
    pub const ALL: GroupKey = GroupKey { scene: None, weather: None, condition: None };

    pub fn of(by: GroupBy, scene: SceneKind, weather: Weather) -> GroupKey {
        let mut k = GroupKey::ALL;
        match by {
            GroupBy::All => {}
            GroupBy::Scene => k.scene = Some(scene),
            GroupBy::Weather => k.weather = Some(weather),
            GroupBy::SceneWeather => {
                k.scene = Some(scene);
                k.weather = Some(weather);
            }
            GroupBy::SceneCondition => {
                k.scene = Some(scene);
                k.condition = Some(weather.into());
            }
        }
        k
    }

    pub fn is_all(&self) -> bool {
        *self == GroupKey::ALL
    }

    pub fn label(&self) -> String {
        if self.is_all() {
            return "all".into();
        }
        let mut parts = Vec::new();
        if let Some(s) = self.scene {
            parts.push(s.ident().to_string());
        }
        if let Some(w) = self.weather {
            parts.push(w.ident().to_string());
        }
        if let Some(c) = self.condition {
            parts.push(match c {
                Condition::Clear => "clear".into(),
                Condition::Adverse => "adverse".into(),
            });
        }
        parts.join("/")
    }
}

/// How per-image accumulators are combined within a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Metrics over the union of all pixels.
    #[default]
    Pooled,
    /// Mean of per-image metrics over images that have both classes.
    PerImageMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub group: String,
    pub key: GroupKey,
    pub auroc: Option<f64>,
    pub ap: Option<f64>,
    pub fpr95: Option<f64>,
    pub pos_total: u64,
    pub neg_total: u64,
    pub images: usize,
}

impl EvalReport {
    pub fn metrics(&self) -> Option<MetricTriple> {
        Some(MetricTriple { auroc: self.auroc?, ap: self.ap?, fpr95: self.fpr95? })
    }
}

/// One evaluated image and its attributes.
#[derive(Debug, Clone)]
pub struct GroupItem<'a> {
    pub scene: SceneKind,
    pub weather: Weather,
    pub acc: &'a MetricAccumulator,
}

fn report_for(key: GroupKey, members: &[&MetricAccumulator], aggregation: Aggregation) -> Result<EvalReport, MetricError> {
    let pooled = MetricAccumulator::merged(members.iter().copied())?.expect("groups are non-empty");
    let (auroc, ap, fpr95) = match aggregation {
        Aggregation::Pooled => (pooled.auroc().ok(), pooled.average_precision().ok(), pooled.fpr_at_95tpr().ok()),
        Aggregation::PerImageMean => {
            let per: Vec<MetricTriple> = members.iter().filter_map(|a| a.metrics().ok()).collect();
            if per.is_empty() {
                (None, None, None)
            } else {
                let n = per.len() as f64;
                (
                    Some(per.iter().map(|m| m.auroc).sum::<f64>() / n),
                    Some(per.iter().map(|m| m.ap).sum::<f64>() / n),
                    Some(per.iter().map(|m| m.fpr95).sum::<f64>() / n),
                )
            }
        }
    };
    Ok(EvalReport {
        group: key.label(),
        key,
        auroc,
        ap,
        fpr95,
        pos_total: pooled.pos_total(),
        neg_total: pooled.neg_total(),
        images: members.len(),
    })
}

/// One report per non-empty group for every requested grouping, followed
/// by the pooled `all` report. Groups are emitted in key order, so the
/// output does not depend on the order of `items`.
pub fn grouped_report(items: &[GroupItem<'_>], group_by: &[GroupBy], aggregation: Aggregation) -> Result<Vec<EvalReport>, MetricError> {
    if let Some(first) = items.first() {
        if items.iter().any(|it| !it.acc.is_compatible(first.acc)) {
            return Err(MetricError::Incompatible);
        }
    } else {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for &by in group_by.iter().filter(|b| **b != GroupBy::All) {
        let mut groups: BTreeMap<GroupKey, Vec<&MetricAccumulator>> = BTreeMap::new();
        for it in items {
            groups.entry(GroupKey::of(by, it.scene, it.weather)).or_default().push(it.acc);
        }
        for (key, members) in groups {
            out.push(report_for(key, &members, aggregation)?);
        }
    }
    let all: Vec<&MetricAccumulator> = items.iter().map(|it| it.acc).collect();
    out.push(report_for(GroupKey::ALL, &all, aggregation)?);
    Ok(out)
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

/// Aligned plain-text listing of reports.
pub fn render_text(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.group.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>8}  {:>8}  {:>8}  {:>12}  {:>12}  {:>6}\n", "group", "AUROC", "AP", "FPR95", "pos", "neg", "images");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>12}  {:>12}  {:>6}",
            r.group,
            pct(r.auroc),
            pct(r.ap),
            pct(r.fpr95),
            r.pos_total,
            r.neg_total,
            r.images
        );
    }
    out
}

/// Scenario rows in table order.
pub const TABLE_SCENES: [SceneKind; 6] = [
    SceneKind::CityStreet,
    SceneKind::GasStation,
    SceneKind::Highway,
    SceneKind::ParkingLot,
    SceneKind::Residential,
    SceneKind::Tunnel,
];

/// Scenario × {Clear, Adverse} table with an `Average / All` row and one
/// AUROC/AP/FPR95 column block per method, values in percent. With more
/// than one method the best value of each column is marked `*`.
pub fn render_scene_weather_table(methods: &[(String, Vec<EvalReport>)]) -> String {
    let lookup = |reports: &[EvalReport], key: GroupKey| reports.iter().find(|r| r.key == key).cloned();
    let mut rows: Vec<(String, String, GroupKey)> = Vec::new();
    for scene in TABLE_SCENES {
        for (cond, name) in [(Condition::Clear, "Clear"), (Condition::Adverse, "Adverse")] {
            rows.push((scene.title().to_string(), name.to_string(), GroupKey { scene: Some(scene), weather: None, condition: Some(cond) }));
        }
    }
    rows.push(("Average".into(), "All".into(), GroupKey::ALL));

    let cell_w = 8usize;
    let block_w = 3 * cell_w + 2 * 2;
    let mut out = String::new();
    let _ = write!(out, "{:<12}  {:<8}", "Scenario", "Weather");
    for (name, _) in methods {
        let _ = write!(out, "  | {:^block_w$}", name);
    }
    out.push('\n');
    let _ = write!(out, "{:<12}  {:<8}", "", "");
    for _ in methods {
        let _ = write!(out, "  | {:>cell_w$}  {:>cell_w$}  {:>cell_w$}", "AUROC", "AP", "FPR95");
    }
    out.push('\n');

    for (scene, weather, key) in rows {
        let vals: Vec<Option<MetricTriple>> = methods.iter().map(|(_, r)| lookup(r, key).and_then(|r| r.metrics())).collect();
        let best = |f: &dyn Fn(&MetricTriple) -> f64, higher: bool| -> Option<f64> {
            let it = vals.iter().flatten().map(f);
            if higher {
                it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            } else {
                it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            }
        };
        let marks = methods.len() > 1;
        let b_auroc = best(&|m| m.auroc, true);
        let b_ap = best(&|m| m.ap, true);
        let b_fpr = best(&|m| m.fpr95, false);
        let _ = write!(out, "{:<12}  {:<8}", scene, weather);
        for v in &vals {
            let cell = |x: Option<f64>, b: Option<f64>| -> String {
                let s = pct(x);
                if marks && x.is_some() && x == b {
                    format!("{s}*")
                } else {
                    s
                }
            };
            let _ = write!(
                out,
                "  | {:>cell_w$}  {:>cell_w$}  {:>cell_w$}",
                cell(v.map(|m| m.auroc), b_auroc),
                cell(v.map(|m| m.ap), b_ap),
                cell(v.map(|m| m.fpr95), b_fpr)
            );
        }
        out.push('\n');
    }
    out
}
