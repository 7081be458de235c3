//! Equal-count cohorts of stocks ranked by a trading attribute.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{ReturnSeries, StockProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    /// Mean minute traded value over capitalization.
    Turnover,
    Cap,
    /// Mean minute traded value.
    TradedValue,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Turnover, Attribute::Cap, Attribute::TradedValue];

    pub fn of(self, profile: &StockProfile) -> f64 {
        match self {
            Attribute::Turnover => profile.turnover,
            Attribute::Cap => profile.cap,
            Attribute::TradedValue => profile.mean_value,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Turnover => "turnover",
            Attribute::Cap => "cap",
            Attribute::TradedValue => "traded_value",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "turnover" => Ok(Attribute::Turnover),
            "cap" => Ok(Attribute::Cap),
            "traded_value" | "value" => Ok(Attribute::TradedValue),
            other => Err(Error::InvalidParameter(format!(
                "unknown attribute `{other}` (expected turnover, cap or traded_value)"
            ))),
        }
    }
}

/// How a group's attribute is summarized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupStat {
    #[default]
    Mean,
    Median,
}

impl FromStr for GroupStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(GroupStat::Mean),
            "median" => Ok(GroupStat::Median),
            other => Err(Error::InvalidParameter(format!(
                "unknown group statistic `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub members: Vec<String>,
    pub size: usize,
    pub group_attribute: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortPartition {
    pub attribute: Attribute,
    pub g: usize,
    pub statistic: GroupStat,
    pub groups: Vec<Cohort>,
}

fn summarize(values: &[f64], stat: GroupStat) -> f64 {
    match stat {
        GroupStat::Mean => values.iter().sum::<f64>() / values.len() as f64,
        GroupStat::Median => {
            // values arrive sorted
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Sorts stocks by `attribute` (ties by id) and cuts them into `g` groups
/// whose sizes differ by at most one, the larger groups first.
pub fn partition_stocks(
    profiles: &[StockProfile],
    attribute: Attribute,
    g: usize,
    stat: GroupStat,
) -> Result<CohortPartition> {
    if g < 2 {
        return Err(Error::InvalidParameter(format!(
            "group count must be at least 2, got {g}"
        )));
    }
    if profiles.len() < g {
        return Err(Error::InsufficientData {
            what: "partition",
            needed: g,
            got: profiles.len(),
        });
    }
    let mut ranked: Vec<(f64, &str)> = Vec::with_capacity(profiles.len());
    for p in profiles {
        let x = attribute.of(p);
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{}: {attribute} is {x}",
                p.stock_id
            )));
        }
        ranked.push((x, &p.stock_id));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = ranked.iter().find(|m| !seen.insert(m.1)) {
        return Err(Error::InvalidParameter(format!(
            "duplicate stock id {}",
            dup.1
        )));
    }

    let (base, extra) = (ranked.len() / g, ranked.len() % g);
    let mut groups = Vec::with_capacity(g);
    let mut rest = &ranked[..];
    for k in 0..g {
        let (head, tail) = rest.split_at(base + usize::from(k < extra));
        rest = tail;
        let xs: Vec<f64> = head.iter().map(|m| m.0).collect();
        groups.push(Cohort {
            members: head.iter().map(|m| m.1.to_string()).collect(),
            size: head.len(),
            group_attribute: summarize(&xs, stat),
        });
    }
    Ok(CohortPartition {
        attribute,
        g,
        statistic: stat,
        groups,
    })
}

/// Concatenates the standardized series of each group's members, in member
/// order. The pooled samples are not re-standardized.
pub fn pool_returns(
    partition: &CohortPartition,
    store: &BTreeMap<String, ReturnSeries>,
) -> Result<Vec<Vec<f64>>> {
    partition
        .groups
        .iter()
        .map(|group| {
            let mut pooled = Vec::new();
            for id in &group.members {
                let series = store
                    .get(id)
                    .ok_or_else(|| Error::MissingSeries(id.clone()))?;
                pooled.extend_from_slice(&series.values);
            }
            Ok(pooled)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profiles(n: usize) -> Vec<StockProfile> {
        (0..n)
            .map(|i| StockProfile {
                stock_id: format!("S{i:03}"),
                cap: 1e9 + i as f64,
                mean_value: 1e5 * (i + 1) as f64,
                turnover: (i + 1) as f64 * 1e-4,
                tradable_shares: 1e8,
            })
            .collect()
    }

    #[test]
    fn forty_into_twenty() {
        let p = partition_stocks(&profiles(40), Attribute::Turnover, 20, GroupStat::Mean).unwrap();
        assert!(p.groups.iter().all(|g| g.size == 2));
    }

    #[test]
    fn remainder_goes_to_low_groups() {
        let p = partition_stocks(&profiles(43), Attribute::Cap, 20, GroupStat::Mean).unwrap();
        let sizes: Vec<usize> = p.groups.iter().map(|g| g.size).collect();
        assert_eq!(&sizes[..4], &[3, 3, 3, 2]);
        assert_eq!(sizes.iter().sum::<usize>(), 43);
    }

    #[test]
    fn means_increase() {
        let p = partition_stocks(&profiles(57), Attribute::Turnover, 7, GroupStat::Mean).unwrap();
        assert!(p
            .groups
            .windows(2)
            .all(|w| w[0].group_attribute < w[1].group_attribute));
        let m = partition_stocks(&profiles(57), Attribute::Turnover, 7, GroupStat::Median).unwrap();
        assert_eq!(p.groups[0].members, m.groups[0].members);
    }

    #[test]
    fn ties_broken_by_id() {
        let mut ps = profiles(4);
        for p in &mut ps {
            p.cap = 1.0;
        }
        ps.reverse();
        let p = partition_stocks(&ps, Attribute::Cap, 2, GroupStat::Mean).unwrap();
        assert_eq!(p.groups[0].members, ["S000", "S001"]);
    }

    #[test]
    fn rejects_bad_g() {
        assert!(partition_stocks(&profiles(5), Attribute::Cap, 1, GroupStat::Mean).is_err());
        assert!(matches!(
            partition_stocks(&profiles(5), Attribute::Cap, 6, GroupStat::Mean),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn pooling() {
        let part = CohortPartition {
            attribute: Attribute::Cap,
            g: 1,
            statistic: GroupStat::Mean,
            groups: vec![Cohort {
                members: vec!["S000".into(), "S001".into()],
                size: 2,
                group_attribute: 0.0,
            }],
        };
        let mut store = BTreeMap::new();
        store.insert(
            "S000".to_string(),
            ReturnSeries {
                stock_id: "S000".into(),
                values: vec![1.0; 100],
                raw_mean: 0.0,
                raw_std: 1.0,
            },
        );
        assert!(
            matches!(pool_returns(&part, &store), Err(Error::MissingSeries(id)) if id == "S001")
        );
        store.insert(
            "S001".to_string(),
            ReturnSeries {
                stock_id: "S001".into(),
                values: vec![2.0; 150],
                raw_mean: 0.0,
                raw_std: 1.0,
            },
        );
        let pooled = pool_returns(&part, &store).unwrap();
        assert_eq!(pooled[0].len(), 250);
        assert_eq!(pooled[0][100], 2.0);
    }
}
