//! Turns timestamped trip records into typed daily walks.
//!
//! Each record is bucketed into one of ten relation types (five daily
//! intervals crossed with weekday/weekend). Per actor and calendar day,
//! records sorted by time are stitched into a walk whenever consecutive
//! records share an endpoint.

use std::io::BufRead;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, HinGraph};
use crate::sampler::TypedWalk;

/// Maps a timestamp to one of ten relation names: five intra-day
/// intervals crossed with `-wd` (weekday) / `-we` (weekend).
#[derive(Debug, Clone)]
pub struct TimeBucketRule {
    /// (name, start minute of day); sorted, first entry must start at 0
    intervals: Vec<(String, u32)>,
}

impl Default for TimeBucketRule {
    fn default() -> Self {
        TimeBucketRule::new(vec![
            ("midnight-to-morning".into(), 0),
            ("peak-morning".into(), 7 * 60),
            ("daytime".into(), 10 * 60),
            ("peak-evening".into(), 17 * 60),
            ("dusk-to-midnight".into(), 20 * 60),
        ])
    }
}

impl TimeBucketRule {
    /// `intervals` partition the day: each entry is (name, start minute)
    /// and runs until the next entry (the last runs to midnight).
    pub fn new(intervals: Vec<(String, u32)>) -> Self {
        assert!(!intervals.is_empty());
        assert_eq!(intervals[0].1, 0, "first interval must start at 00:00");
        assert!(intervals.windows(2).all(|w| w[0].1 < w[1].1));
        assert!(intervals.iter().all(|(_, m)| *m < 24 * 60));
        TimeBucketRule { intervals }
    }

    /// All relation names this rule can produce, weekday variants first.
    pub fn relation_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .intervals
            .iter()
            .map(|(n, _)| format!("{n}-wd"))
            .collect();
        names.extend(self.intervals.iter().map(|(n, _)| format!("{n}-we")));
        names
    }

    pub fn bucket_of(&self, t: NaiveDateTime) -> String {
        let minute = t.hour() * 60 + t.minute();
        let idx = self
            .intervals
            .iter()
            .rposition(|(_, start)| *start <= minute)
            .unwrap();
        let suffix = if is_weekend(t) { "we" } else { "wd" };
        format!("{}-{}", self.intervals[idx].0, suffix)
    }
}

fn is_weekend(t: NaiveDateTime) -> bool {
    matches!(
        t.weekday(),
        chrono::Weekday::Sat | chrono::Weekday::Sun
    )
}

/// One trip record: actor, timestamp, source node name, destination
/// node name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub actor: String,
    pub time: NaiveDateTime,
    pub src: String,
    pub dst: String,
}

/// Parse results: valid orders plus the count of rows skipped for
/// unparseable timestamps.
#[derive(Debug)]
pub struct ParsedOrders {
    pub orders: Vec<Order>,
    pub skipped: usize,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

/// Reads `actor<TAB>iso8601_timestamp<TAB>src<TAB>dst` rows. Rows with
/// a bad timestamp are skipped and counted; rows with the wrong column
/// count are a hard error.
pub fn parse_orders<R: BufRead>(reader: R, path: &str) -> Result<ParsedOrders> {
    let mut orders = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRow {
                path: path.to_string(),
                line: i + 1,
                expected: 4,
                got: fields.len(),
            });
        }
        match parse_timestamp(fields[1]) {
            Some(time) => orders.push(Order {
                actor: fields[0].to_string(),
                time,
                src: fields[2].to_string(),
                dst: fields[3].to_string(),
            }),
            None => skipped += 1,
        }
    }
    Ok(ParsedOrders { orders, skipped })
}

/// Builds the trip graph: one edge per order, typed by its time bucket.
pub fn orders_to_graph(orders: &[Order], rule: &TimeBucketRule) -> HinGraph {
    let mut b = GraphBuilder::new();
    for o in orders {
        b.add_edge(&o.src, &rule.bucket_of(o.time), &o.dst);
    }
    b.build()
}

/// Stitches orders into typed walks over `g` (built by
/// [`orders_to_graph`] from the same records). A new walk starts
/// whenever the actor or calendar day changes, or when an order's
/// source is not the previous order's destination.
pub fn trajectory_to_walks(
    orders: &[Order],
    rule: &TimeBucketRule,
    g: &HinGraph,
) -> Result<Vec<TypedWalk>> {
    let mut sorted: Vec<&Order> = orders.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.actor, a.time.date(), a.time)
            .cmp(&(&b.actor, b.time.date(), b.time))
    });

    let mut walks = Vec::new();
    let mut nodes: Vec<crate::graph::NodeId> = Vec::new();
    let mut relations: Vec<crate::graph::EdgeTypeId> = Vec::new();
    let mut prev_key: Option<(&str, NaiveDate)> = None;
    let mut prev_dst: Option<&str> = None;

    let lookup_node = |name: &str| {
        g.node_id(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string(), vec![]))
    };

    for o in sorted {
        let key = (o.actor.as_str(), o.time.date());
        let chained = prev_key == Some(key) && prev_dst == Some(o.src.as_str());
        if !chained {
            if nodes.len() >= 2 {
                walks.push(TypedWalk::new(
                    std::mem::take(&mut nodes),
                    std::mem::take(&mut relations),
                ));
            }
            nodes.clear();
            relations.clear();
            nodes.push(lookup_node(&o.src)?);
        }
        let bucket = rule.bucket_of(o.time);
        let rel = g
            .edge_type_id(&bucket)
            .ok_or_else(|| Error::UnknownEdgeType(bucket.clone()))?;
        relations.push(rel);
        nodes.push(lookup_node(&o.dst)?);
        prev_key = Some(key);
        prev_dst = Some(o.dst.as_str());
    }
    if nodes.len() >= 2 {
        walks.push(TypedWalk::new(nodes, relations));
    }
    Ok(walks)
}
