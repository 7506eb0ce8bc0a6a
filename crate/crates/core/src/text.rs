//! The read-only input sequence and its probe-counting contract.
//!
//! Queries only ever see symbols through [`ProbedText::access`], which charges
//! one probe to the caller's [`ProbeSession`]. Construction code reads the
//! payload directly through [`ProbedText::symbols`]; those reads are not
//! charged to anyone.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use crate::error::{Error, Result};

/// On-disk encodings accepted by [`ProbedText::load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// One symbol per byte.
    Raw8,
    /// Consecutive 32-bit little-endian unsigned integers.
    U32Le,
    /// ASCII decimal integers separated by whitespace.
    Tokens,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw8" => Ok(InputFormat::Raw8),
            "u32le" => Ok(InputFormat::U32Le),
            "tokens" => Ok(InputFormat::Tokens),
            other => Err(Error::InvalidParameter(format!(
                "unknown input format {other:?} (expected raw8, u32le or tokens)"
            ))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Raw8 => "raw8",
            InputFormat::U32Le => "u32le",
            InputFormat::Tokens => "tokens",
        })
    }
}

/// Per-query probe counter.
///
/// Sessions are cheap; create a fresh one per query to measure that query.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ProbeSession {
    count: u64,
}

impl ProbeSession {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of successful `access` calls made through this session.
    pub fn count(&self) -> u64 {
        self.count
    }
}

/// A read-only symbol sequence over the alphabet `[0, sigma)`.
#[derive(Debug, Clone)]
pub struct ProbedText {
    sigma: u32,
    symbols: Vec<u32>,
    fingerprint: u64,
}

impl ProbedText {
    /// Wraps an in-memory sequence. If `sigma` is `None` the alphabet is
    /// `1 + max symbol`, but never smaller than 2.
    pub fn from_symbols(symbols: Vec<u32>, sigma: Option<u32>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyText);
        }
        let sigma = match sigma {
            Some(sigma) => {
                if let Some(position) = symbols.iter().position(|&s| s >= sigma) {
                    return Err(Error::malformed(
                        position,
                        format!("symbol {} is not below sigma {sigma}", symbols[position]),
                    ));
                }
                sigma
            }
            None => {
                let max = *symbols.iter().max().expect("non-empty");
                max.checked_add(1)
                    .ok_or_else(|| Error::InvalidParameter("alphabet larger than 2^32".into()))?
                    .max(2)
            }
        };
        if sigma < 2 {
            return Err(Error::InvalidParameter(format!(
                "alphabet size must be at least 2, got {sigma}"
            )));
        }
        if sigma as usize > symbols.len() {
            return Err(Error::SigmaExceedsLength {
                sigma: sigma as u64,
                n: symbols.len(),
            });
        }
        let fingerprint = fingerprint(sigma, &symbols);
        Ok(Self {
            sigma,
            symbols,
            fingerprint,
        })
    }

    /// Reads and validates a text from `source`.
    pub fn load<R: Read>(
        mut source: R,
        format: InputFormat,
        declared_sigma: Option<u32>,
    ) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        let symbols = decode(&bytes, format)?;
        Self::from_symbols(symbols, declared_sigma)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    /// FNV-1a over `n` (u64 LE), `sigma` (u32 LE) and each symbol (u32 LE).
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Returns `s[i]` and charges one probe to `session`.
    pub fn access(&self, session: &mut ProbeSession, i: usize) -> Result<u32> {
        let symbol = *self.symbols.get(i).ok_or(Error::OutOfRange {
            index: i,
            len: self.symbols.len(),
        })?;
        session.count += 1;
        Ok(symbol)
    }

    /// Uncharged view of the whole payload, for construction and oracles.
    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }
}

fn decode(bytes: &[u8], format: InputFormat) -> Result<Vec<u32>> {
    match format {
        InputFormat::Raw8 => Ok(bytes.iter().map(|&b| b as u32).collect()),
        InputFormat::U32Le => {
            if bytes.len() % 4 != 0 {
                return Err(Error::malformed(
                    bytes.len() / 4,
                    "trailing bytes do not form a 32-bit symbol",
                ));
            }
            Ok(bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        }
        InputFormat::Tokens => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| Error::malformed(0, format!("not valid text: {e}")))?;
            text.split_ascii_whitespace()
                .enumerate()
                .map(|(position, token)| {
                    token
                        .parse::<u32>()
                        .map_err(|e| Error::malformed(position, format!("token {token:?}: {e}")))
                })
                .collect()
        }
    }
}

pub(crate) const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

pub(crate) fn fingerprint(sigma: u32, symbols: &[u32]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &(symbols.len() as u64).to_le_bytes());
    h = fnv1a(h, &sigma.to_le_bytes());
    for s in symbols {
        h = fnv1a(h, &s.to_le_bytes());
    }
    h
}
