//! JSONL manifests: one header line, then one record per sample.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::views::ViewConfig;

pub const MANIFEST_FORMAT: &str = "raydio-manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    /// Always "by_tx": every sample of a transmitter shares its split.
    pub rule: String,
    pub ratios: [f64; 3],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub name: String,
    pub view_config: ViewConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub scenes: Vec<SceneEntry>,
    /// Run configuration the samples were produced with.
    pub config: serde_json::Value,
    pub split: SplitRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Ok,
    Failed,
}

/// File paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub scene: String,
    pub tx_index: usize,
    pub rx_index: usize,
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub seed: u64,
    pub split: Split,
    pub status: SampleStatus,
    pub path_count: usize,
    pub inputs: Vec<String>,
    pub targets: Vec<String>,
    pub csi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    /// Transmitter identity used for splitting.
    pub fn tx_key(&self) -> (String, usize) {
        (self.scene.clone(), self.tx_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = json_line(&self.header)?;
        for r in &self.records {
            out.push_str(&json_line(r)?);
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::parse("manifest", "empty file"))?;
        let header: ManifestHeader = serde_json::from_str(first).map_err(|e| Error::parse("manifest header", e))?;
        if header.format != MANIFEST_FORMAT {
            return Err(Error::parse("manifest header", format!("unsupported format {:?}", header.format)));
        }
        let records = lines
            .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("manifest line {}", n + 1), e)))
            .collect::<Result<Vec<SampleRecord>>>()?;
        Ok(Manifest { header, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::views::write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn view_config(&self, scene: &str) -> Option<&ViewConfig> {
        self.header.scenes.iter().find(|s| s.name == scene).map(|s| &s.view_config)
    }

    /// Transmitters that appear under more than one split.
    pub fn leaking_transmitters(&self) -> Vec<(String, usize)> {
        let mut seen: BTreeMap<(String, usize), BTreeSet<Split>> = BTreeMap::new();
        for r in &self.records {
            seen.entry(r.tx_key()).or_default().insert(r.split);
        }
        seen.into_iter().filter(|(_, s)| s.len() > 1).map(|(k, _)| k).collect()
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::parse("manifest", e))?;
    s.push('\n');
    Ok(s)
}

/// Bucket sizes for `n` items: largest-remainder apportionment, then every
/// bucket with a nonzero ratio gets at least one item.
fn apportion(n: usize, ratios: &[f64; 3]) -> Result<[usize; 3]> {
    let wanted = ratios.iter().filter(|&&r| r > 0.0).count();
    if n < wanted {
        return Err(Error::contract(format!(
            "{n} transmitters cannot fill {wanted} nonempty split buckets"
        )));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = n - sizes.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[k] > 0.0 {
            sizes[k] += 1;
            left -= 1;
        }
    }
    for k in 0..3 {
        if ratios[k] > 0.0 && sizes[k] == 0 {
            let donor = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).expect("three buckets");
            sizes[donor] -= 1;
            sizes[k] += 1;
        }
    }
    Ok(sizes)
}

/// Assigns splits per transmitter. Each scene's transmitters are shuffled
/// with `seed` and partitioned by `ratios`, so every scene appears in every
/// nonempty split and no transmitter spans two splits.
pub fn split_by_tx(manifest: &Manifest, ratios: [f64; 3], seed: u64) -> Result<Manifest> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut per_scene: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for r in &manifest.records {
        per_scene.entry(&r.scene).or_default().insert(r.tx_index);
    }
    let mut assignment: BTreeMap<(String, usize), Split> = BTreeMap::new();
    for (scene, txs) in per_scene {
        let mut txs: Vec<usize> = txs.into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ super::fnv1a(scene.as_bytes()));
        txs.shuffle(&mut rng);
        let sizes = apportion(txs.len(), &ratios)?;
        let mut it = txs.into_iter();
        for (split, n) in Split::ALL.into_iter().zip(sizes) {
            for t in it.by_ref().take(n) {
                assignment.insert((scene.to_string(), t), split);
            }
        }
    }
    let mut out = manifest.clone();
    for r in &mut out.records {
        r.split = assignment[&r.tx_key()];
    }
    out.header.split = SplitRule {
        rule: "by_tx".into(),
        ratios,
        seed,
    };
    Ok(out)
}
