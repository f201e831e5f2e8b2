// SPDX-License-Identifier: MIT OR Apache-2.0

//! Tabular output helpers shared by the experiment runners.

mod csv;

pub use csv::{format_g17, CsvTable};
