//! CSV emission. Every table renders with one provenance comment line and a
//! header row; floats use Rust's shortest round-trip formatting, which is
//! deterministic across runs and worker counts.

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Rendered as a leading `# ...` comment line.
    pub provenance: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(provenance: String, headers: &[&str]) -> Self {
        Table {
            provenance,
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# ");
        out.push_str(&self.provenance);
        out.push('\n');
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn cell(x: f64) -> String {
    format!("{x}")
}

pub fn provenance(command: &str, detail: &str) -> String {
    format!("aoi v{} command={command} {detail}", env!("CARGO_PKG_VERSION"))
}
