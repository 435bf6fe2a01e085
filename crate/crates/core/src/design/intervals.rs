//! Allocation rules: the ability intervals that route examinees to items.

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use super::RestrictedDesign;
use crate::blocks::{Block, ItemId};

/// Closed ability interval; the outermost ones of a block are unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Num(f64),
    Tag(String),
}

fn encode(x: f64) -> Endpoint {
    if x == f64::INFINITY {
        Endpoint::Tag("inf".into())
    } else if x == f64::NEG_INFINITY {
        Endpoint::Tag("-inf".into())
    } else {
        Endpoint::Num(x)
    }
}

fn decode<E: de::Error>(e: Endpoint) -> Result<f64, E> {
    match e {
        Endpoint::Num(x) => Ok(x),
        Endpoint::Tag(s) if s == "inf" => Ok(f64::INFINITY),
        Endpoint::Tag(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Endpoint::Tag(s) => Err(E::custom(format!("bad interval endpoint {s:?}"))),
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&encode(self.lo))?;
        t.serialize_element(&encode(self.hi))?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (lo, hi) = <(Endpoint, Endpoint)>::deserialize(d)?;
        let iv = Interval { lo: decode(lo)?, hi: decode(hi)? };
        if iv.lo.is_nan() || iv.hi.is_nan() || iv.lo > iv.hi {
            return Err(de::Error::custom(format!("invalid interval [{}, {}]", iv.lo, iv.hi)));
        }
        Ok(iv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemIntervals {
    pub item_id: ItemId,
    pub intervals: Vec<Interval>,
}

/// Per-block routing rule. Intervals of different items share endpoints and
/// together cover the real line; an ability sitting exactly on a shared
/// endpoint goes to the interval with the smaller lower endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationRules {
    pub block_id: usize,
    pub items: Vec<ItemIntervals>,
}

impl AllocationRules {
    /// Every interval with its item, ordered along the axis.
    fn segments(&self) -> Vec<(Interval, ItemId)> {
        let mut segs: Vec<(Interval, ItemId)> = self
            .items
            .iter()
            .flat_map(|it| it.intervals.iter().map(move |iv| (*iv, it.item_id)))
            .collect();
        segs.sort_by(|x, y| x.0.lo.total_cmp(&y.0.lo));
        segs
    }

    /// Checks the intervals tile the real line without overlap.
    pub fn validate(&self) -> Result<(), String> {
        let segs = self.segments();
        let (Some(first), Some(last)) = (segs.first(), segs.last()) else {
            return Err(format!("block {} has no intervals", self.block_id));
        };
        if first.0.lo != f64::NEG_INFINITY || last.0.hi != f64::INFINITY {
            return Err(format!("block {} does not cover the real line", self.block_id));
        }
        for w in segs.windows(2) {
            if w[0].0.hi != w[1].0.lo {
                return Err(format!(
                    "block {}: intervals [{}, {}] and [{}, {}] are not adjacent",
                    self.block_id, w[0].0.lo, w[0].0.hi, w[1].0.lo, w[1].0.hi
                ));
            }
        }
        Ok(())
    }

    pub fn intervals_of(&self, id: ItemId) -> Option<&[Interval]> {
        self.items.iter().find(|it| it.item_id == id).map(|it| it.intervals.as_slice())
    }

    pub fn lookup(&self) -> RuleLookup {
        let segs = self.segments();
        RuleLookup {
            upper: segs.iter().map(|(iv, _)| iv.hi).collect(),
            item: segs.iter().map(|(_, id)| *id).collect(),
        }
    }

    pub fn item_for(&self, theta: f64) -> ItemId {
        self.lookup().item_for(theta)
    }
}

/// Precomputed breakpoints for fast routing.
#[derive(Debug, Clone)]
pub struct RuleLookup {
    upper: Vec<f64>,
    item: Vec<ItemId>,
}

impl RuleLookup {
    pub fn item_for(&self, theta: f64) -> ItemId {
        let k = self.upper.partition_point(|&hi| hi < theta);
        self.item[k.min(self.item.len() - 1)]
    }
}

/// Turns a design into interval rules.
///
/// Each grid point goes to the item with the largest share (lower index on
/// ties). Maximal runs of equal labels form one interval; neighbouring runs
/// meet halfway between their last and first grid points, and the outermost
/// runs extend to infinity.
pub fn extract_intervals(design: &RestrictedDesign, block: &Block, block_id: usize) -> AllocationRules {
    let labels = design.labels();
    let pts = design.grid().points();
    let mut per_item: Vec<Vec<Interval>> = vec![Vec::new(); design.items()];
    let mut start = 0;
    let mut lo = f64::NEG_INFINITY;
    for q in 1..=labels.len() {
        if q == labels.len() || labels[q] != labels[start] {
            let hi = if q == labels.len() { f64::INFINITY } else { 0.5 * (pts[q - 1] + pts[q]) };
            per_item[labels[start]].push(Interval { lo, hi });
            lo = hi;
            start = q;
        }
    }
    AllocationRules {
        block_id,
        items: block
            .items()
            .iter()
            .zip(per_item)
            .map(|(it, intervals)| ItemIntervals { item_id: it.id, intervals })
            .collect(),
    }
}
