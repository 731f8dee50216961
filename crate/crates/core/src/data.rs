//! Long-format longitudinal data: one row per (subject, response type, visit).

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Index into [`LongDataset::subjects`].
    pub subject: usize,
    /// Response type, 1-based.
    pub response: usize,
    /// Visit, 1-based.
    pub visit: usize,
    pub y: f64,
    /// Fixed-effects design row.
    pub x: Vec<f64>,
    /// Random-effects design row.
    pub z: Vec<f64>,
}

/// Observations plus the subject roster. Subjects may have no rows at all;
/// missing visits are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct LongDataset {
    subjects: Vec<String>,
    rows: Vec<Observation>,
    x_names: Vec<String>,
    z_names: Vec<String>,
}

impl LongDataset {
    /// Validates row lengths and `(subject, response, visit)` uniqueness.
    /// Row numbers in errors are 1-based positions in `rows`.
    pub fn new(
        subjects: Vec<String>,
        rows: Vec<Observation>,
        x_names: Vec<String>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        let (p, q) = (x_names.len(), z_names.len());
        let mut seen = HashSet::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let row = i + 1;
            if r.subject >= subjects.len() {
                return Err(Error::Schema {
                    row,
                    message: format!("subject index {} out of range", r.subject),
                });
            }
            if r.x.len() != p || r.z.len() != q {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {p} x and {q} z values, found {} and {}", r.x.len(), r.z.len()),
                });
            }
            if r.response == 0 || r.visit == 0 {
                return Err(Error::Schema {
                    row,
                    message: "response and visit are 1-based".into(),
                });
            }
            if !r.y.is_finite() || r.x.iter().chain(&r.z).any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row,
                    message: "non-finite value".into(),
                });
            }
            if !seen.insert((r.subject, r.response, r.visit)) {
                return Err(Error::Schema {
                    row,
                    message: format!(
                        "duplicate key (subject {}, response {}, visit {})",
                        subjects[r.subject], r.response, r.visit
                    ),
                });
            }
        }
        Ok(LongDataset {
            subjects,
            rows,
            x_names,
            z_names,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [Observation] {
        &mut self.rows
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Total number of observations `N`.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.x_names.len()
    }

    pub fn q(&self) -> usize {
        self.z_names.len()
    }

    /// Number of response types `H`.
    pub fn n_responses(&self) -> usize {
        self.rows.iter().map(|r| r.response).max().unwrap_or(0)
    }

    pub fn max_visit(&self) -> usize {
        self.rows.iter().map(|r| r.visit).max().unwrap_or(0)
    }

    /// Appends a subject with no observations and returns its index.
    pub fn add_subject(&mut self, id: impl Into<String>) -> usize {
        self.subjects.push(id.into());
        self.subjects.len() - 1
    }

    pub fn y(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }
}

/// Visit-indicator random design: `q = responses * max_visit`, with a single
/// 1 at position `(response - 1) * max_visit + (visit - 1)`.
pub fn indicator_z(response: usize, visit: usize, n_responses: usize, max_visit: usize) -> Vec<f64> {
    let mut z = vec![0.0; n_responses * max_visit];
    z[(response - 1) * max_visit + (visit - 1)] = 1.0;
    z
}

pub fn indicator_names(n_responses: usize, max_visit: usize) -> Vec<String> {
    (1..=n_responses)
        .flat_map(|h| (1..=max_visit).map(move |j| format!("z_h{h}_v{j}")))
        .collect()
}
