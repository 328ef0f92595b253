mod baseline;
mod curate;
mod eval;
mod serve;
mod single;

use anyhow::Result;

use crate::args::{BaselineCommand, Command, EvalCommand};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Detect(a) => single::run_detect(a),
        Command::Attribute(a) => single::run_attribute(a),
        Command::Eval(EvalCommand::Subtask1(a)) => eval::run_subtask1(a),
        Command::Eval(EvalCommand::Subtask2(a)) => eval::run_subtask2(a),
        Command::Eval(EvalCommand::Positions(a)) => eval::run_positions(a),
        Command::Eval(EvalCommand::Disambig(a)) => eval::run_disambig(a),
        Command::Curate(a) => curate::run_curate(a),
        Command::Baseline(BaselineCommand::Bm25(a)) => baseline::run_bm25(a),
        Command::Baseline(BaselineCommand::Dense(a)) => baseline::run_dense(a),
        Command::Baseline(BaselineCommand::LlmSpans(a)) => baseline::run_llm_spans(a),
        Command::Baseline(BaselineCommand::LlmAttr(a)) => baseline::run_llm_attr(a),
        Command::Sweep(a) => eval::run_sweep(a),
        Command::Serve(a) => serve::run_serve(a),
        Command::Extract(a) => serve::run_extract(a),
    }
}
