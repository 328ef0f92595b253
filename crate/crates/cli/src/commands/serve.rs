//! `serve` and `extract`.

use std::sync::Arc;

use anyhow::Result;
use attrib_core::prompt::known_templates;
use attrib_service::extractor::{CommandExtractor, ExtractRequest, Extractor, HttpExtractor, OneHotExtractor};
use attrib_service::AppState;

use crate::args::{ExtractArgs, ExtractorFlags, ServeArgs};
use crate::output::{invalid, require_file};

fn command_extractor(flags: &ExtractorFlags, model: &str) -> Option<CommandExtractor> {
    flags.extractor_cmd.as_ref().map(|program| {
        let mut e = CommandExtractor::new(program, model);
        e.prefix_args = flags.extractor_args.clone();
        e
    })
}

pub fn run_serve(a: &ServeArgs) -> Result<()> {
    let model = || a.model.clone().ok_or_else(|| invalid("--model is required with an external extractor"));
    let extractor: Option<Arc<dyn Extractor>> = if a.synthetic {
        Some(Arc::new(OneHotExtractor::default()))
    } else if let Some(url) = &a.extractor_url {
        Some(Arc::new(HttpExtractor { base_url: url.clone(), model: model()?, timeout_secs: 600 }))
    } else if a.extractor.extractor_cmd.is_some() {
        command_extractor(&a.extractor, &model()?).map(|e| Arc::new(e) as Arc<dyn Extractor>)
    } else {
        log::warn!("no extractor configured; session creation will be refused");
        None
    };
    let mut state = AppState::open(&a.sessions, extractor)?;
    state.cors_origin = a.cors_origin.clone();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(attrib_service::serve(a.addr, Arc::new(state)))?;
    Ok(())
}

pub fn run_extract(a: &ExtractArgs) -> Result<()> {
    require_file(&a.doc)?;
    require_file(&a.question)?;
    if !known_templates().contains(&a.template.as_str()) {
        return Err(invalid(format!("unknown template {:?}", a.template)));
    }
    let answer = match &a.answer {
        Some(path) => {
            require_file(path)?;
            Some(std::fs::read_to_string(path)?)
        }
        None => None,
    };
    let request = ExtractRequest {
        document: std::fs::read_to_string(&a.doc)?,
        question: std::fs::read_to_string(&a.question)?,
        answer,
        template_id: a.template.clone(),
    };
    let extractor: Box<dyn Extractor> = if a.synthetic {
        if a.synthetic_layers == 0 {
            return Err(invalid("--synthetic-layers must be at least 1"));
        }
        Box::new(OneHotExtractor { layer_count: a.synthetic_layers })
    } else {
        Box::new(
            command_extractor(&a.extractor, &a.model)
                .ok_or_else(|| invalid("no extractor: pass --extractor-cmd, set ATTRIB_EXTRACTOR or use --synthetic"))?,
        )
    };
    extractor.extract(&request, &a.out)?;
    Ok(())
}
