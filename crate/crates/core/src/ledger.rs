//! Per-example state carried across iterations.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Major version of the checkpoint layout. Readers reject any other major.
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

/// Dense example index, `0..N` for a corpus of `N` examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceId(pub usize);

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    #[default]
    Active,
    /// Demoted by the review mechanism; reachable again only through review draws.
    LowCriterion,
    /// Discarded by the hard-removal baseline; never trained again.
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: SentenceId,
    /// Cost from the previous time this example was trained.
    pub prev_cost: Option<f64>,
    /// Cost from the most recent time this example was trained.
    pub curr_cost: Option<f64>,
    /// Relative cost decrease `(prev - curr) / prev`; negative when the cost rose.
    pub dif: Option<f64>,
    /// Min-max normalized dif, always in `[0, 1]` when present.
    pub criterion: Option<f64>,
    pub group: Group,
    pub last_trained_iteration: Option<u32>,
    /// Harness metadata for noise-injection runs. Samplers never read it.
    pub is_noise: bool,
    /// Set when a zero previous cost made the dif undefined.
    pub cost_guarded: bool,
}

impl SentenceRecord {
    fn new(id: SentenceId) -> Self {
        Self {
            id,
            prev_cost: None,
            curr_cost: None,
            dif: None,
            criterion: None,
            group: Group::Active,
            last_trained_iteration: None,
            is_noise: false,
            cost_guarded: false,
        }
    }
}

/// All per-example records plus the iteration counter and the sampling RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLedger {
    records: Vec<SentenceRecord>,
    iteration: u32,
    #[serde(with = "rng_state")]
    rng: ChaCha8Rng,
}

impl CorpusLedger {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCorpus(
                "corpus must contain at least one example".into(),
            ));
        }
        Ok(Self {
            records: (0..n).map(|i| SentenceRecord::new(SentenceId(i))).collect(),
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn record(&self, id: SentenceId) -> Result<&SentenceRecord> {
        self.records.get(id.0).ok_or(Error::UnknownSentence(id))
    }

    pub(crate) fn records_mut(&mut self) -> &mut [SentenceRecord] {
        &mut self.records
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn ids_in(&self, group: Group) -> Vec<SentenceId> {
        self.records
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.id)
            .collect()
    }

    pub fn count_in(&self, group: Group) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    pub fn set_noise_flags(&mut self, flags: &[bool]) -> Result<()> {
        if flags.len() != self.records.len() {
            return Err(Error::InvalidCorpus(format!(
                "noise flags cover {} examples, ledger has {}",
                flags.len(),
                self.records.len()
            )));
        }
        for (record, &flag) in self.records.iter_mut().zip(flags) {
            record.is_noise = flag;
        }
        Ok(())
    }

    /// Records the costs of every example trained in the iteration that is
    /// finishing, then closes that iteration.
    ///
    /// Each listed record rotates `curr_cost` into `prev_cost`. Records not in
    /// `costs` are left untouched so their criterion carries forward. The whole
    /// map is validated before anything is written.
    pub fn record_costs(&mut self, costs: &BTreeMap<SentenceId, f64>) -> Result<()> {
        for (&id, &cost) in costs {
            if id.0 >= self.records.len() {
                return Err(Error::UnknownSentence(id));
            }
            if !(cost.is_finite() && cost >= 0.0) {
                return Err(Error::InvalidCost { id, cost });
            }
        }
        let current = self.iteration + 1;
        for (&id, &cost) in costs {
            let record = &mut self.records[id.0];
            if let Some(old) = record.curr_cost {
                record.prev_cost = Some(old);
            }
            record.curr_cost = Some(cost);
            record.last_trained_iteration = Some(current);
        }
        self.iteration = current;
        Ok(())
    }
}

/// ChaCha state as plain JSON. The word position is a decimal string because
/// serde's buffered (flattened or tagged) deserialization cannot hold a u128.
pub(crate) mod rng_state {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct State {
        seed: [u8; 32],
        stream: u64,
        word_pos: String,
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        State {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        let state = State::deserialize(d)?;
        let pos: u128 = state.word_pos.parse().map_err(D::Error::custom)?;
        let mut rng = ChaCha8Rng::from_seed(state.seed);
        rng.set_stream(state.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Serialize)]
struct LedgerDocRef<'a> {
    format_version: &'a str,
    ledger: &'a CorpusLedger,
}

#[derive(Deserialize)]
struct LedgerDoc {
    format_version: String,
    ledger: CorpusLedger,
}

/// Serializes a ledger, including its RNG state, as a JSON document.
pub fn snapshot(ledger: &CorpusLedger) -> String {
    let doc = LedgerDocRef {
        format_version: FORMAT_VERSION,
        ledger,
    };
    serde_json::to_string_pretty(&doc).expect("ledger serialization is infallible")
}

pub fn restore(checkpoint: &str) -> Result<CorpusLedger> {
    let value: serde_json::Value =
        serde_json::from_str(checkpoint).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    check_format_version(&value)?;
    let doc: LedgerDoc =
        serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let _ = doc.format_version;
    validate(&doc.ledger)?;
    Ok(doc.ledger)
}

pub(crate) fn check_format_version(doc: &serde_json::Value) -> Result<()> {
    let version = doc
        .get("format_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::CorruptCheckpoint("missing format_version".into()))?;
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| Error::CorruptCheckpoint(format!("bad format_version {version:?}")))?;
    if major != FORMAT_MAJOR {
        return Err(Error::UnsupportedVersion(version.to_string()));
    }
    Ok(())
}

pub(crate) fn validate(ledger: &CorpusLedger) -> Result<()> {
    if ledger.records.is_empty() {
        return Err(Error::CorruptCheckpoint("no records".into()));
    }
    for (k, r) in ledger.records.iter().enumerate() {
        if r.id.0 != k {
            return Err(Error::CorruptCheckpoint(format!(
                "record {k} carries id {}",
                r.id
            )));
        }
        if let Some(c) = r.criterion {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::CorruptCheckpoint(format!(
                    "criterion {c} out of range at {k}"
                )));
            }
        }
    }
    Ok(())
}
