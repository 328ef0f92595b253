use std::fs::File;
use std::io::BufReader;

use anyhow::Result;
use attrib_core::datasets::{curate, parse_quotesum, read_jsonl, write_jsonl, RawVerifiabilityRecord};
use attrib_core::detection::StopList;

use crate::args::{CurateArgs, RawFormat};
use crate::output::{invalid, log_run, require_file, OutDir, SIDECAR_LOG};

pub const SAMPLES_JSONL: &str = "samples.jsonl";
pub const DROPPED_JSONL: &str = "dropped.jsonl";

pub fn run_curate(a: &CurateArgs) -> Result<()> {
    require_file(&a.input)?;
    let out = OutDir::create(&a.out)?;
    match a.format {
        RawFormat::Verifiability => {
            let records: Vec<RawVerifiabilityRecord> =
                read_jsonl(&a.input).map_err(|e| invalid(format!("{}: {e}", a.input.display())))?;
            let r = curate(&records, &StopList::english_v1());
            write_jsonl(out.file(SAMPLES_JSONL), &r.samples)?;
            write_jsonl(out.file(DROPPED_JSONL), &r.dropped)?;
            eprintln!("kept {} of {} records", r.samples.len(), records.len());
        }
        RawFormat::Quotesum => {
            let samples = parse_quotesum(BufReader::new(File::open(&a.input)?))
                .map_err(|e| invalid(format!("{}: {e}", a.input.display())))?;
            write_jsonl(out.file(SAMPLES_JSONL), &samples)?;
            eprintln!("parsed {} samples", samples.len());
        }
    }
    log_run(&out.file(SIDECAR_LOG))
}
