use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::fid::{self, EmbeddingSet};

/// Scores and set shapes reported by the `fid` command.
#[derive(Debug, Clone, PartialEq)]
pub struct FidReport {
    pub real_n: usize,
    pub real_d: usize,
    pub fake_n: usize,
    pub fake_d: usize,
    pub score: f64,
}

impl FidReport {
    pub fn to_text(&self) -> String {
        format!(
            "real: n={} d={}\nfake: n={} d={}\nfid={:.2}\n",
            self.real_n, self.real_d, self.fake_n, self.fake_d, self.score
        )
    }
}

/// Sibling embedding file consulted for an image directory: `<dir>.emb1`.
pub fn sibling_emb1(dir: &Path) -> PathBuf {
    let mut name = dir.as_os_str().to_owned();
    name.push(".emb1");
    PathBuf::from(name)
}

fn load_side(path: &Path, surrogate: bool) -> Result<EmbeddingSet, PipelineError> {
    if path.is_dir() {
        if surrogate {
            return Ok(fid::embed_directory(path)?);
        }
        let sibling = sibling_emb1(path);
        if sibling.is_file() {
            return Ok(fid::read_emb1(&sibling)?);
        }
        return Err(PipelineError::Usage(format!(
            "{} is an image directory: pass --surrogate or provide {}",
            path.display(),
            sibling.display()
        )));
    }
    Ok(fid::read_emb1(path)?)
}

/// FID between two EMB1 files or image directories.
pub fn fid_command(real: &Path, fake: &Path, surrogate: bool) -> Result<FidReport, PipelineError> {
    let r = load_side(real, surrogate)?;
    let f = load_side(fake, surrogate)?;
    if r.d() != f.d() {
        return Err(PipelineError::MixedInput {
            real_d: r.d(),
            fake_d: f.d(),
        });
    }
    let score = fid::fid(&r, &f)?;
    Ok(FidReport {
        real_n: r.n(),
        real_d: r.d(),
        fake_n: f.n(),
        fake_d: f.d(),
        score,
    })
}
