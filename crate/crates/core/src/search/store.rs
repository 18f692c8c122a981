//! Win/visit statistics keyed by (state signature, strategy).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::SearchError;
use crate::scene::Scene;

/// Coordinates are quantized to this step before hashing.
const QUANTUM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateSig(pub u64);

impl fmt::Display for StateSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Stable hash of the scene's canonical text: sorted labels with quantized
/// coordinates, sorted segments, planes and facts.
pub fn state_signature(scene: &Scene) -> StateSig {
    StateSig(hash_text(&canonical_scene_text(scene)))
}

pub fn hash_text(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

pub fn canonical_scene_text(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str(&format!("dim {}\n", scene.dimension()));
    for l in scene.labels() {
        let p = scene.pos(l).expect("listed label");
        let q = p.0.map(|c| (c / QUANTUM).round() as i64);
        out.push_str(&format!("point {l} {} {} {}\n", q[0], q[1], q[2]));
    }
    for s in scene.segments() {
        out.push_str(&format!("segment {} {}\n", s.a(), s.b()));
    }
    let mut planes: Vec<String> =
        scene.planes().iter().map(|p| serde_json::to_string(p).expect("serializes")).collect();
    planes.sort();
    for p in planes {
        out.push_str(&format!("plane {p}\n"));
    }
    let mut facts: Vec<String> =
        scene.facts().iter().map(|(f, _)| serde_json::to_string(f).expect("serializes")).collect();
    facts.sort();
    for f in facts {
        out.push_str(&format!("fact {f}\n"));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeStats {
    pub w: u64,
    pub n: u64,
    /// Prior; 1 unless configured otherwise.
    pub q: f64,
}

impl NodeStats {
    pub fn new(w: u64, n: u64) -> Self {
        NodeStats { w, n, q: 1.0 }
    }

    /// `w/n`, zero for an unvisited entry.
    pub fn win_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.w as f64 / self.n as f64
        }
    }
}

impl Default for NodeStats {
    fn default() -> Self {
        NodeStats::new(0, 0)
    }
}

pub type StoreKey = (StateSig, String);

/// Pending increments, applied to a store in one step by [`StatsStore::fold`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StoreDelta {
    updates: BTreeMap<StoreKey, (u64, u64)>,
}

impl StoreDelta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, sig: StateSig, strategy: &str, win: bool) {
        let e = self.updates.entry((sig, strategy.to_owned())).or_default();
        e.0 += u64::from(win);
        e.1 += 1;
    }

    pub fn get(&self, sig: StateSig, strategy: &str) -> (u64, u64) {
        self.updates.get(&(sig, strategy.to_owned())).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    /// Total visit increments.
    pub fn visits(&self) -> u64 {
        self.updates.values().map(|v| v.1).sum()
    }

    pub fn wins(&self) -> u64 {
        self.updates.values().map(|v| v.0).sum()
    }

    pub fn merge(&mut self, other: &StoreDelta) {
        for (k, (w, n)) in &other.updates {
            let e = self.updates.entry(k.clone()).or_default();
            e.0 += w;
            e.1 += n;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StoreKey, &(u64, u64))> {
        self.updates.iter()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsStore {
    entries: BTreeMap<StoreKey, NodeStats>,
}

impl StatsStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sig: StateSig, strategy: &str) -> NodeStats {
        self.entries.get(&(sig, strategy.to_owned())).copied().unwrap_or_default()
    }

    /// Stats with `delta`'s pending increments on top.
    pub fn get_with(&self, delta: &StoreDelta, sig: StateSig, strategy: &str) -> NodeStats {
        let mut s = self.get(sig, strategy);
        let (w, n) = delta.get(sig, strategy);
        s.w += w;
        s.n += n;
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StoreKey, &NodeStats)> {
        self.entries.iter()
    }

    /// Overwrites one entry. Rejects `w > n`.
    pub fn set(&mut self, sig: StateSig, strategy: &str, stats: NodeStats) -> Result<(), SearchError> {
        if stats.w > stats.n {
            return Err(SearchError::InvalidStats { key: format!("{sig} {strategy}"), w: stats.w, n: stats.n });
        }
        self.entries.insert((sig, strategy.to_owned()), stats);
        Ok(())
    }

    /// Applies every increment or none.
    pub fn fold(&mut self, delta: &StoreDelta) -> Result<(), SearchError> {
        for ((sig, s), (w, n)) in delta.iter() {
            let cur = self.get(*sig, s);
            if cur.w + w > cur.n + n {
                return Err(SearchError::InvalidStats { key: format!("{sig} {s}"), w: cur.w + w, n: cur.n + n });
            }
        }
        for ((sig, s), (w, n)) in delta.iter() {
            let e = self.entries.entry((*sig, s.clone())).or_default();
            e.w += w;
            e.n += n;
        }
        Ok(())
    }

    /// One `<hash> <strategy> <w> <n>` line per entry, sorted.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> =
            self.entries.iter().map(|((sig, s), st)| format!("{sig} {s} {} {}", st.w, st.n)).collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SearchError> {
        let mut store = StatsStore::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| SearchError::StoreParse { line: i + 1, message: what.to_owned() };
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 4 {
                return Err(bad("expected `<hash> <strategy> <w> <n>`"));
            }
            if parts[0].len() != 16 {
                return Err(bad("state hash must be 16 hex digits"));
            }
            let sig = u64::from_str_radix(parts[0], 16).map_err(|_| bad("state hash must be 16 hex digits"))?;
            let w: u64 = parts[2].parse().map_err(|_| bad("w is not a count"))?;
            let n: u64 = parts[3].parse().map_err(|_| bad("n is not a count"))?;
            if w > n {
                return Err(bad("w exceeds n"));
            }
            if store.entries.insert((StateSig(sig), parts[1].to_owned()), NodeStats::new(w, n)).is_some() {
                return Err(bad("duplicate entry"));
            }
        }
        Ok(store)
    }

    /// Writes through a temporary file renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.to_text().as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut s = StatsStore::new();
        s.set(StateSig(0xabc), "connect(C,E)", NodeStats::new(235518, 236152)).unwrap();
        s.set(StateSig(0x1), "midpoint(B,P)->F", NodeStats::new(322, 236152)).unwrap();
        let text = s.to_text();
        assert_eq!(text, "0000000000000001 midpoint(B,P)->F 322 236152\n0000000000000abc connect(C,E) 235518 236152\n");
        assert_eq!(StatsStore::from_text(&text).unwrap(), s);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = StatsStore::from_text("0000000000000001 x 1 1\n0000000000000001 y 5 2\n").unwrap_err();
        assert!(matches!(err, SearchError::StoreParse { line: 2, .. }));
    }

    #[test]
    fn fold_is_all_or_nothing() {
        let mut s = StatsStore::new();
        let mut d = StoreDelta::new();
        d.record(StateSig(1), "a", true);
        d.record(StateSig(1), "b", false);
        s.fold(&d).unwrap();
        assert_eq!(s.get(StateSig(1), "a"), NodeStats::new(1, 1));
        assert_eq!(s.get(StateSig(1), "b"), NodeStats::new(0, 1));
        assert!(s.set(StateSig(2), "c", NodeStats::new(2, 1)).is_err());
    }

    #[test]
    fn signature_ignores_insertion_order() {
        let a = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[1.0, 0.0]).segment("AB").build().unwrap();
        let b = Scene::builder(2).point("B", &[1.0, 0.0]).point("A", &[0.0, 0.0]).segment("BA").build().unwrap();
        assert_eq!(state_signature(&a), state_signature(&b));
        let c = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[1.0, 0.0]).build().unwrap();
        assert_ne!(state_signature(&a), state_signature(&c));
    }
}
