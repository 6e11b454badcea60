//! Finite words and position-addressed symbol streams over `{0, .., k-1}`.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// A finite word. The empty word stands for the identity composition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    symbols: Vec<usize>,
    alphabet: usize,
}

impl Word {
    pub fn new(symbols: Vec<usize>, alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::BadParameter("alphabet size must be at least 1".into()));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::SymbolOutOfRange { symbol: s, alphabet });
        }
        Ok(Word { symbols, alphabet })
    }

    pub fn empty(alphabet: usize) -> Self {
        Word { symbols: Vec::new(), alphabet: alphabet.max(1) }
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn into_symbols(self) -> Vec<usize> {
        self.symbols
    }

    /// Parse a JSON array of 0-based symbols.
    pub fn from_json(text: &str, alphabet: usize) -> Result<Self> {
        let symbols: Vec<usize> =
            serde_json::from_str(text).map_err(|e| Error::BadParameter(e.to_string()))?;
        Word::new(symbols, alphabet)
    }

    /// The word with its first `n` symbols removed.
    pub fn drop_first(&self, n: usize) -> Word {
        Word { symbols: self.symbols[n.min(self.len())..].to_vec(), alphabet: self.alphabet }
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.symbols.serialize(s)
    }
}

/// Human-readable form uses 1-based letters, e.g. `(1,2,1)`.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        write!(f, ")")
    }
}

/// Anything that can produce the itinerary of a point.
pub trait ItinerarySource: Send + Sync {
    fn alphabet(&self) -> usize;
    fn itinerary(&self, start: Point, n: usize) -> Result<Word>;
}

#[derive(Clone)]
pub enum StreamKind {
    Periodic(Vec<usize>),
    Iid { seed: u64 },
    Itinerary { source: Arc<dyn ItinerarySource>, start: Point },
}

impl fmt::Debug for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamKind::Periodic(w) => f.debug_tuple("Periodic").field(w).finish(),
            StreamKind::Iid { seed } => f.debug_struct("Iid").field("seed", seed).finish(),
            StreamKind::Itinerary { start, .. } => {
                f.debug_struct("Itinerary").field("start", start).finish()
            }
        }
    }
}

/// An infinite one-sided sequence, addressed by position. Shifting only moves
/// the offset, so streams are cheap to copy and share between workers.
#[derive(Clone, Debug)]
pub struct SymbolStream {
    kind: StreamKind,
    alphabet: usize,
    offset: usize,
}

fn iid_symbol(rng: &mut ChaCha8Rng, k: usize) -> usize {
    ((rng.next_u64() as u128 * k as u128) >> 64) as usize
}

fn iid_rng(seed: u64, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * position as u128);
    rng
}

impl SymbolStream {
    pub fn periodic(word: &Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::BadParameter("periodic stream needs a nonempty word".into()));
        }
        Ok(SymbolStream {
            kind: StreamKind::Periodic(word.symbols().to_vec()),
            alphabet: word.alphabet(),
            offset: 0,
        })
    }

    pub fn iid(seed: u64, alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::BadParameter("alphabet size must be at least 1".into()));
        }
        Ok(SymbolStream { kind: StreamKind::Iid { seed }, alphabet, offset: 0 })
    }

    pub fn itinerary(source: Arc<dyn ItinerarySource>, start: Point) -> Self {
        let alphabet = source.alphabet();
        SymbolStream { kind: StreamKind::Itinerary { source, start }, alphabet, offset: 0 }
    }

    pub fn kind(&self) -> &StreamKind {
        &self.kind
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn is_itinerary(&self) -> bool {
        matches!(self.kind, StreamKind::Itinerary { .. })
    }

    pub fn shift(&self) -> Self {
        self.shift_by(1)
    }

    pub fn shift_by(&self, n: usize) -> Self {
        SymbolStream { offset: self.offset + n, ..self.clone() }
    }

    /// Symbol at position `i` of this (possibly shifted) stream.
    pub fn symbol_at(&self, i: usize) -> Result<usize> {
        let pos = self.offset + i;
        match &self.kind {
            StreamKind::Periodic(w) => Ok(w[pos % w.len()]),
            StreamKind::Iid { seed } => Ok(iid_symbol(&mut iid_rng(*seed, pos), self.alphabet)),
            StreamKind::Itinerary { source, start } => {
                Ok(source.itinerary(*start, pos + 1)?.symbols()[pos])
            }
        }
    }

    pub fn prefix(&self, n: usize) -> Result<Word> {
        let symbols = match &self.kind {
            StreamKind::Itinerary { source, start } => {
                source.itinerary(*start, self.offset + n)?.symbols()[self.offset..].to_vec()
            }
            _ => {
                let mut r = self.reader(n)?;
                (0..n).map(|_| r.next_symbol()).collect()
            }
        };
        Word::new(symbols, self.alphabet)
    }

    /// Sequential reader. Itinerary streams are materialized up to `horizon`.
    pub fn reader(&self, horizon: usize) -> Result<SymbolReader> {
        Ok(match &self.kind {
            StreamKind::Periodic(w) => SymbolReader::Periodic { word: w.clone(), pos: self.offset },
            StreamKind::Iid { seed } => SymbolReader::Iid {
                rng: Box::new(iid_rng(*seed, self.offset)),
                alphabet: self.alphabet,
            },
            StreamKind::Itinerary { .. } => {
                SymbolReader::Buffered { word: self.prefix(horizon)?.into_symbols(), pos: 0 }
            }
        })
    }

    pub fn to_spec(&self) -> StreamSpec {
        let mut params = StreamParams { alphabet: self.alphabet, offset: self.offset, word: None, start: None };
        let (kind, seed) = match &self.kind {
            StreamKind::Periodic(w) => {
                params.word = Some(w.clone());
                (StreamKindName::FixedPeriodic, None)
            }
            StreamKind::Iid { seed } => (StreamKindName::IidUniform, Some(*seed)),
            StreamKind::Itinerary { start, .. } => {
                params.start = Some(vec![start.x, start.y]);
                (StreamKindName::ItineraryDriven, None)
            }
        };
        StreamSpec { kind, params, seed }
    }

    /// Rebuild a stream from its serialized form. Itinerary streams need the source.
    pub fn from_spec(spec: &StreamSpec, source: Option<Arc<dyn ItinerarySource>>) -> Result<Self> {
        let p = &spec.params;
        let base = match spec.kind {
            StreamKindName::FixedPeriodic => {
                let w = p.word.clone().ok_or_else(|| Error::BadParameter("missing params.word".into()))?;
                SymbolStream::periodic(&Word::new(w, p.alphabet)?)?
            }
            StreamKindName::IidUniform => {
                let seed = spec.seed.ok_or_else(|| Error::BadParameter("iid stream needs a seed".into()))?;
                SymbolStream::iid(seed, p.alphabet)?
            }
            StreamKindName::ItineraryDriven => {
                let src = source.ok_or_else(|| Error::BadParameter("itinerary stream needs a family".into()))?;
                let s = p.start.as_deref().ok_or_else(|| Error::BadParameter("missing params.start".into()))?;
                let start = Point::new(s.first().copied().unwrap_or(0.0), s.get(1).copied().unwrap_or(0.0));
                SymbolStream::itinerary(src, start)
            }
        };
        Ok(base.shift_by(p.offset))
    }
}

pub enum SymbolReader {
    Periodic { word: Vec<usize>, pos: usize },
    Iid { rng: Box<ChaCha8Rng>, alphabet: usize },
    Buffered { word: Vec<usize>, pos: usize },
}

impl SymbolReader {
    /// Next symbol. Buffered readers panic when read past their horizon.
    pub fn next_symbol(&mut self) -> usize {
        match self {
            SymbolReader::Periodic { word, pos } => {
                let s = word[*pos % word.len()];
                *pos += 1;
                s
            }
            SymbolReader::Iid { rng, alphabet } => iid_symbol(rng, *alphabet),
            SymbolReader::Buffered { word, pos } => {
                let s = word[*pos];
                *pos += 1;
                s
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamKindName {
    FixedPeriodic,
    IidUniform,
    ItineraryDriven,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamParams {
    pub alphabet: usize,
    #[serde(default)]
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKindName,
    pub params: StreamParams,
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &[usize], k: usize) -> Word {
        Word::new(s.to_vec(), k).unwrap()
    }

    #[test]
    fn periodic_shift_rotates() {
        let s = SymbolStream::periodic(&w(&[0, 1], 2)).unwrap().shift();
        assert_eq!(s.prefix(4).unwrap().symbols(), &[1, 0, 1, 0]);
    }

    #[test]
    fn prefix_examples() {
        let s = SymbolStream::periodic(&w(&[0, 1], 2)).unwrap();
        assert!(s.prefix(0).unwrap().is_empty());
        assert_eq!(s.prefix(5).unwrap().symbols(), &[0, 1, 0, 1, 0]);
    }

    #[test]
    fn iid_shift_drops_first() {
        let s = SymbolStream::iid(7, 3).unwrap();
        let a = s.prefix(5).unwrap();
        let b = s.shift().prefix(4).unwrap();
        assert_eq!(&a.symbols()[1..], b.symbols());
    }

    #[test]
    fn iid_random_access_matches_reader() {
        let s = SymbolStream::iid(11, 5).unwrap().shift_by(3);
        let p = s.prefix(50).unwrap();
        for i in 0..50 {
            assert_eq!(s.symbol_at(i).unwrap(), p.symbols()[i]);
        }
    }

    #[test]
    fn iid_reproducible_and_in_range() {
        let a = SymbolStream::iid(42, 3).unwrap().prefix(100_000).unwrap();
        let b = SymbolStream::iid(42, 3).unwrap().prefix(100_000).unwrap();
        assert_eq!(a, b);
        let counts = a.symbols().iter().fold([0usize; 3], |mut c, &s| {
            c[s] += 1;
            c
        });
        for c in counts {
            assert!((c as f64 / 1e5 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn word_validation_and_display() {
        assert!(Word::new(vec![0, 2], 2).is_err());
        assert_eq!(w(&[0, 1, 0], 2).to_string(), "(1,2,1)");
        assert_eq!(serde_json::to_string(&w(&[0, 1], 2)).unwrap(), "[0,1]");
        assert_eq!(Word::from_json("[1,0]", 2).unwrap(), w(&[1, 0], 2));
    }

    #[test]
    fn spec_round_trip() {
        let s = SymbolStream::iid(9, 4).unwrap().shift_by(2);
        let spec = s.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"iid-uniform\""));
        let back: StreamSpec = serde_json::from_str(&json).unwrap();
        let t = SymbolStream::from_spec(&back, None).unwrap();
        assert_eq!(s.prefix(20).unwrap(), t.prefix(20).unwrap());
    }
}
