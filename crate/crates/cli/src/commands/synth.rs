use super::resolve_path;
use crate::manifest::{now_unix, write_manifest};
use memchain::data::{synth_generate, SynthSpec};
use memchain::error::{Error, Result};
use std::io::Write;
use std::path::Path;

pub fn run(
    spec_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    sentences: Option<usize>,
) -> Result<u8> {
    let started = now_unix();
    let mut spec: SynthSpec = match spec_path {
        Some(p) => {
            let p = resolve_path(p)?;
            let text = std::fs::read_to_string(&p)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad synth spec: {e}")))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = sentences {
        spec.sentences = n;
    }

    let corpus = synth_generate(&spec)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("corpus.json"), serde_json::to_string_pretty(&corpus.records)?)?;

    let mut emb = std::io::BufWriter::new(std::fs::File::create(out.join("embeddings.txt"))?);
    for (token, values) in &corpus.embeddings {
        write!(emb, "{token}")?;
        for v in values {
            write!(emb, " {v}")?;
        }
        writeln!(emb)?;
    }
    emb.flush()?;

    write_manifest(&out.join("manifest.json"), "synth", &spec, started)?;
    println!(
        "{} sentences, {} vocabulary entries written to {}",
        corpus.records.len(),
        corpus.embeddings.len(),
        out.display()
    );
    Ok(0)
}
