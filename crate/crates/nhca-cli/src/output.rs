//! Report directory: CSV and JSON files headed by the run configuration,
//! plus a manifest listing them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

pub struct OutDir {
    root: PathBuf,
    config: Value,
    files: Vec<String>,
    started: Instant,
}

impl OutDir {
    pub fn create(root: &Path, config: Value) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            config,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV with a leading `# {config}` comment line.
    pub fn csv<S: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = S>) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# {}", self.config).expect("writing to a Vec cannot fail");
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(|e| CliError::io(self.root.join(name), e))?;
        }
        self.write(name, &buf)
    }

    /// Pretty JSON with the configuration under `"config"`.
    pub fn json(&mut self, name: &str, body: &impl Serialize) -> Result<()> {
        let mut value = serde_json::to_value(body).expect("report types serialize");
        if let Value::Object(map) = &mut value {
            map.insert("config".into(), self.config.clone());
        }
        let text = serde_json::to_string_pretty(&value).expect("values serialize") + "\n";
        self.write(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body.as_bytes())
    }

    pub fn finish(self, command: &str) -> Result<()> {
        let manifest = json!({
            "command": command,
            "version": nhca_core::VERSION,
            "config": self.config,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("values serialize") + "\n";
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }
}

/// Log-scale line chart of `sup f_t` and `sup ρ_μ` against `M`.
pub fn decay_svg(ms: &[u32], f_t: &[f64], rho: &[f64], title: &str) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const PAD: f64 = 48.0;
    let logs: Vec<f64> = f_t.iter().chain(rho).filter(|v| **v > 0.0).map(|v| v.log2()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 1.0) };
    let m0 = ms.first().copied().unwrap_or(0) as f64;
    let m1 = (ms.last().copied().unwrap_or(1) as f64).max(m0 + 1.0);
    let x = |m: u32| PAD + (m as f64 - m0) / (m1 - m0) * (W - 2.0 * PAD);
    let y = |v: f64| {
        let l = if v > 0.0 { v.log2() } else { lo };
        H - PAD - (l - lo) / (hi - lo) * (H - 2.0 * PAD)
    };
    let line = |vals: &[f64], colour: &str| {
        let pts: Vec<String> = ms.iter().zip(vals).map(|(&m, &v)| format!("{:.2},{:.2}", x(m), y(v))).collect();
        format!(r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, pts.join(" "))
    };
    let mut out = String::new();
    out.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    ));
    out.push('\n');
    out.push_str(&format!("<title>{}</title>\n", escape(title)));
    out.push_str(&format!(
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    ));
    out.push('\n');
    for &m in ms {
        out.push_str(&format!(
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{m}</text>"#,
            x(m),
            H - PAD + 16.0
        ));
        out.push('\n');
    }
    out.push_str(&format!(r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">M</text>"#, W / 2.0, H - 8.0));
    out.push('\n');
    for (v, label) in [(hi, hi), (lo, lo)] {
        out.push_str(&format!(
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">2^{label}</text>"#,
            PAD - 4.0,
            y(2f64.powf(v)) + 4.0
        ));
        out.push('\n');
    }
    out.push_str(&line(f_t, "#1f77b4"));
    out.push('\n');
    out.push_str(&line(rho, "#ff7f0e"));
    out.push('\n');
    out.push_str(&format!(
        r##"<text x="{}" y="{}" font-size="11" fill="#1f77b4">sup f_t</text><text x="{}" y="{}" font-size="11" fill="#ff7f0e">sup rho_mu</text>"##,
        PAD + 6.0,
        PAD - 8.0,
        PAD + 80.0,
        PAD - 8.0
    ));
    out.push_str("\n</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
