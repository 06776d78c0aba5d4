//! File formats for the core types.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rkhs_invlab_core::{Branch, Estimate, GramMatrix, RateExponents, RateFit, SampleSet};

use crate::error::{Error, Result};
use crate::report::write_atomic;

/// Row-major CSV; the header lists the points.
pub fn gram_csv(gram: &GramMatrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = gram.points.iter().map(|x| x.to_string()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..gram.len() {
        let row: Vec<String> = (0..gram.len())
            .map(|j| gram.entries[(i, j)].to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Columns `i,x,y` with a 1-based `i`.
pub fn samples_csv(samples: &SampleSet) -> String {
    let mut out = String::from("i,x,y\n");
    for (i, (x, y)) in samples.design.iter().zip(&samples.outputs).enumerate() {
        let _ = writeln!(out, "{},{x},{y}", i + 1);
    }
    out
}

pub fn estimate_json(estimate: &Estimate) -> Result<String> {
    serde_json::to_string_pretty(estimate).map_err(|e| Error::Report(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub inputs: RateExponents,
    pub branch: Branch,
    /// Converted rate and schedule exponents.
    pub exponents: ConvertedExponents,
    pub fitted_slope: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvertedExponents {
    pub rate: f64,
    pub lambda: f64,
}

impl RateReport {
    pub fn new(
        inputs: RateExponents,
        conversion: rkhs_invlab_core::Conversion,
        fit: Option<&RateFit>,
    ) -> Self {
        Self {
            inputs,
            branch: conversion.branch,
            exponents: ConvertedExponents {
                rate: conversion.rate_exponent,
                lambda: conversion.lambda_exponent,
            },
            fitted_slope: fit.map(|f| f.slope),
            stderr: fit.map(|f| f.stderr),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
