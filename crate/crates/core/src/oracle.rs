//! Linear-scan reference answers.

use crate::error::{Error, Result};
use crate::text::ProbedText;

fn check_symbol(text: &ProbedText, c: u32) -> Result<()> {
    if c >= text.sigma() {
        return Err(Error::BadSymbol {
            symbol: c as u64,
            sigma: text.sigma(),
        });
    }
    Ok(())
}

/// Occurrences of `c` in `s[0, p)`.
pub fn rank(text: &ProbedText, c: u32, p: usize) -> Result<usize> {
    check_symbol(text, c)?;
    let prefix = text.symbols().get(..p).ok_or(Error::OutOfRange {
        index: p,
        len: text.len(),
    })?;
    Ok(prefix.iter().filter(|&&s| s == c).count())
}

/// Position of the `j`-th occurrence (1-based) of `c`, or `None`.
pub fn select(text: &ProbedText, c: u32, j: usize) -> Result<Option<usize>> {
    check_symbol(text, c)?;
    if j == 0 {
        return Err(Error::InvalidParameter("occurrence numbers start at 1".into()));
    }
    Ok(text
        .symbols()
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s == c)
        .nth(j - 1)
        .map(|(i, _)| i))
}
