//! Execution modes for per-node updates.
//!
//! Every round of every method is a barrier-synchronous map over nodes:
//! node `i`'s next row is a pure function of the previous round's full
//! state. Parallel execution therefore produces bitwise-identical results
//! to sequential execution, which the test suite asserts.

/// How per-node work inside one round is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon-parallel over nodes. Falls back to the sequential path for
    /// small networks where task overhead dominates; results are identical
    /// either way.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecMode::Sequential
    }
}

impl std::str::FromStr for ExecMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sequential" => Ok(ExecMode::Sequential),
            #[cfg(feature = "parallel")]
            "parallel" => Ok(ExecMode::Parallel),
            #[cfg(not(feature = "parallel"))]
            "parallel" => Err("built without the `parallel` feature".into()),
            other => Err(format!("unknown exec mode `{other}`")),
        }
    }
}

/// Below this node count the parallel mode runs sequentially anyway.
#[cfg(feature = "parallel")]
pub(crate) const PAR_MIN_NODES: usize = 32;

/// Fill `out` (n rows of `row_len`) by computing each row independently.
pub(crate) fn fill_rows<F>(mode: ExecMode, out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert_eq!(out.len() % row_len, 0);
    match mode {
        ExecMode::Sequential => {
            for (i, row) in out.chunks_mut(row_len).enumerate() {
                f(i, row);
            }
        }
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            let n = out.len() / row_len;
            if n < PAR_MIN_NODES {
                for (i, row) in out.chunks_mut(row_len).enumerate() {
                    f(i, row);
                }
            } else {
                use rayon::prelude::*;
                out.par_chunks_mut(row_len)
                    .enumerate()
                    .for_each(|(i, row)| f(i, row));
            }
        }
    }
}

/// Fill two same-shape buffers row by row in one pass (the second buffer is
/// per-node scratch so the hot loop never allocates).
pub(crate) fn fill_rows2<F>(mode: ExecMode, out: &mut [f64], scratch: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    debug_assert_eq!(out.len(), scratch.len());
    debug_assert_eq!(out.len() % row_len, 0);
    match mode {
        ExecMode::Sequential => {
            for (i, (row, tmp)) in out
                .chunks_mut(row_len)
                .zip(scratch.chunks_mut(row_len))
                .enumerate()
            {
                f(i, row, tmp);
            }
        }
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            let n = out.len() / row_len;
            if n < PAR_MIN_NODES {
                for (i, (row, tmp)) in out
                    .chunks_mut(row_len)
                    .zip(scratch.chunks_mut(row_len))
                    .enumerate()
                {
                    f(i, row, tmp);
                }
            } else {
                use rayon::prelude::*;
                out.par_chunks_mut(row_len)
                    .zip(scratch.par_chunks_mut(row_len))
                    .enumerate()
                    .for_each(|(i, (row, tmp))| f(i, row, tmp));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_fills_every_row() {
        let mut out = vec![0.0; 12];
        fill_rows(ExecMode::Sequential, &mut out, 3, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (i * 10 + j) as f64;
            }
        });
        assert_eq!(out[0], 0.0);
        assert_eq!(out[4], 11.0);
        assert_eq!(out[11], 32.0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let n = 128;
        let p = 7;
        let work = |i: usize, row: &mut [f64]| {
            let mut acc = 1.0f64;
            for (j, v) in row.iter_mut().enumerate() {
                acc = (acc + (i * 31 + j) as f64).sin();
                *v = acc;
            }
        };
        let mut a = vec![0.0; n * p];
        let mut b = vec![0.0; n * p];
        fill_rows(ExecMode::Sequential, &mut a, p, work);
        fill_rows(ExecMode::Parallel, &mut b, p, work);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
