use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// `v` with `digits` significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        // rounding can carry into a new digit (9.999995 -> 10.00000)
        let rounded: f64 = fixed.parse().unwrap_or(v);
        if rounded.abs().log10().floor() as i32 != exp {
            let decimals = decimals.saturating_sub(1);
            return format!("{v:.decimals$}");
        }
        fixed
    } else {
        format!("{v:.prec$e}", prec = digits - 1)
    }
}

/// Files written together: each is staged next to its destination and only
/// renamed into place once every write succeeded.
#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
        let tmp = staging_path(path);
        let res = fs::File::create(&tmp).and_then(|mut f| f.write_all(bytes).and_then(|()| f.sync_all()));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            self.abort();
            return Err(e);
        }
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(mut self) -> std::io::Result<()> {
        let files = std::mem::take(&mut self.files);
        for (i, (tmp, dst)) in files.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dst) {
                for (_, done) in &files[..i] {
                    let _ = fs::remove_file(done);
                }
                for (t, _) in &files[i..] {
                    let _ = fs::remove_file(t);
                }
                return Err(e);
            }
        }
        Ok(())
    }

    fn abort(&mut self) {
        for (tmp, _) in self.files.drain(..) {
            let _ = fs::remove_file(tmp);
        }
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        self.abort();
    }
}

fn staging_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}
