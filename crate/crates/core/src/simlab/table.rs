//! Coverage tables: markdown for reading, CSV at full precision for tooling.

use std::io::{Read, Write};

use crate::error::Result;

use super::runner::CoverageCell;

const HEADER: [&str; 10] = ["v", "CATE", "c_h", "Ave. Est.", "Ave. S.E.", "80% Cov.", "95% Cov.", "MC S.E. 80%", "MC S.E. 95%", "Failures"];

fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    // avoid printing negative zero
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn pct(x: f64) -> String {
    format!("{:.0}%", 100.0 * x)
}

/// Markdown rendering; estimates and errors to two decimals, coverage in whole percent.
pub fn markdown_table(cells: &[CoverageCell]) -> String {
    let mut out = format!("| {} |\n|{}\n", HEADER.join(" | "), "---|".repeat(HEADER.len()));
    for c in cells {
        let row = [
            fmt2(c.v),
            fmt2(c.cate),
            fmt2(c.c_h),
            fmt2(c.ave_est),
            fmt2(c.ave_se),
            pct(c.cov80),
            pct(c.cov95),
            pct(c.mcse80),
            pct(c.mcse95),
            format!("{}{}", c.failures, if c.flagged { " (flagged)" } else { "" }),
        ];
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

pub fn write_csv<W: Write>(cells: &[CoverageCell], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["v", "cate", "c_h", "replications", "completed", "failures", "ave_est", "ave_se", "sd_est", "cov80", "cov95", "mcse80", "mcse95", "flagged"])?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CoverageCell>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub markdown: String,
    pub csv: String,
}

pub fn assemble_table(cells: &[CoverageCell]) -> Table {
    let mut buf = Vec::new();
    write_csv(cells, &mut buf).expect("writing to memory cannot fail");
    Table { markdown: markdown_table(cells), csv: String::from_utf8(buf).expect("csv output is utf-8") }
}
