//! Model checkpoint files.
//!
//! A checkpoint is a *bundle*: free-form metadata, any number of named
//! networks, and any number of named `f64` vectors (e.g. normalization
//! statistics), serialized as a plain-text header followed by a raw
//! little-endian `f64` payload. The header is versioned and carries a
//! SHA-256 of the payload, so loads are self-describing, validated, and
//! round-trip parameters bit-exactly.
//!
//! ```text
//! hipode-checkpoint v1
//! meta role state_transition
//! net encoder
//! dims 4 750 8
//! hidden relu
//! output identity
//! vec state_mean 2
//! payload 9758
//! sha256 <hex>
//! ---
//! <payload: each net's layers (weights row-major, then bias), then vecs>
//! ```

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &str = "hipode-checkpoint v1";
const HEADER_END: &[u8] = b"---\n";

#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub meta: BTreeMap<String, String>,
    pub nets: Vec<(String, Mlp)>,
    pub vecs: Vec<(String, Vec<f64>)>,
}

impl Bundle {
    pub fn new() -> Self {
        Bundle::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_net(mut self, name: &str, net: Mlp) -> Self {
        self.nets.push((name.to_string(), net));
        self
    }

    pub fn with_vec(mut self, name: &str, v: Vec<f64>) -> Self {
        self.vecs.push((name.to_string(), v));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.meta(key).ok_or_else(|| Error::MalformedFile {
            path: path.display().to_string(),
            detail: format!("missing meta key `{key}`"),
        })?;
        raw.parse().map_err(|_| Error::MalformedFile {
            path: path.display().to_string(),
            detail: format!("meta key `{key}` has unparsable value `{raw}`"),
        })
    }

    pub fn take_net(&mut self, name: &str, path: &Path) -> Result<Mlp> {
        let pos = self
            .nets
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::MalformedFile {
                path: path.display().to_string(),
                detail: format!("missing net `{name}`"),
            })?;
        Ok(self.nets.remove(pos).1)
    }

    pub fn take_vec(&mut self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let pos = self
            .vecs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::MalformedFile {
                path: path.display().to_string(),
                detail: format!("missing vec `{name}`"),
            })?;
        Ok(self.vecs.remove(pos).1)
    }
}

pub fn save_bundle(path: &Path, bundle: &Bundle) -> Result<()> {
    let mut payload: Vec<f64> = Vec::new();
    for (_, net) in &bundle.nets {
        payload.extend(net.flat_params());
    }
    for (_, v) in &bundle.vecs {
        payload.extend_from_slice(v);
    }
    let mut payload_bytes = Vec::with_capacity(payload.len() * 8);
    for x in &payload {
        payload_bytes.extend_from_slice(&x.to_le_bytes());
    }
    let digest = hex::encode(Sha256::digest(&payload_bytes));

    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    for (k, v) in &bundle.meta {
        header.push_str(&format!("meta {k} {v}\n"));
    }
    for (name, net) in &bundle.nets {
        header.push_str(&format!("net {name}\n"));
        header.push_str("dims");
        for d in net.layer_dims() {
            header.push_str(&format!(" {d}"));
        }
        header.push('\n');
        header.push_str(&format!("hidden {}\n", net.hidden_activation().name()));
        header.push_str(&format!("output {}\n", net.output_activation().name()));
    }
    for (name, v) in &bundle.vecs {
        header.push_str(&format!("vec {name} {}\n", v.len()));
    }
    header.push_str(&format!("payload {}\n", payload.len()));
    header.push_str(&format!("sha256 {digest}\n"));

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(HEADER_END))
        .and_then(|_| file.write_all(&payload_bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_bundle(path: &Path) -> Result<Bundle> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let path_str = path.display().to_string();
    let malformed = |detail: String| Error::MalformedFile {
        path: path_str.clone(),
        detail,
    };

    let split = find_header_end(&bytes)
        .ok_or_else(|| malformed("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| malformed("header is not utf-8".into()))?;
    let payload_bytes = &bytes[split + HEADER_END.len()..];

    let mut lines = header.lines();
    let magic = lines.next().ok_or_else(|| malformed("empty header".into()))?;
    if magic != MAGIC {
        return Err(malformed(format!("bad magic `{magic}`")));
    }

    struct NetDecl {
        name: String,
        dims: Vec<usize>,
        hidden: Option<Activation>,
        output: Option<Activation>,
    }

    let mut meta = BTreeMap::new();
    let mut net_decls: Vec<NetDecl> = Vec::new();
    let mut vec_decls: Vec<(String, usize)> = Vec::new();
    let mut payload_len: Option<usize> = None;
    let mut checksum: Option<String> = None;

    for line in lines {
        let mut parts = line.splitn(2, ' ');
        let tag = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("");
        match tag {
            "meta" => {
                let mut kv = rest.splitn(2, ' ');
                let k = kv.next().unwrap_or("").to_string();
                let v = kv.next().unwrap_or("").to_string();
                meta.insert(k, v);
            }
            "net" => net_decls.push(NetDecl {
                name: rest.to_string(),
                dims: Vec::new(),
                hidden: None,
                output: None,
            }),
            "dims" => {
                let decl = net_decls
                    .last_mut()
                    .ok_or_else(|| malformed("dims before net".into()))?;
                decl.dims = rest
                    .split_whitespace()
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| malformed(format!("bad dims line `{rest}`")))?;
            }
            "hidden" => {
                let decl = net_decls
                    .last_mut()
                    .ok_or_else(|| malformed("hidden before net".into()))?;
                decl.hidden = Some(Activation::parse(rest)?);
            }
            "output" => {
                let decl = net_decls
                    .last_mut()
                    .ok_or_else(|| malformed("output before net".into()))?;
                decl.output = Some(Activation::parse(rest)?);
            }
            "vec" => {
                let mut kv = rest.split_whitespace();
                let name = kv.next().unwrap_or("").to_string();
                let len: usize = kv
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(format!("bad vec line `{rest}`")))?;
                vec_decls.push((name, len));
            }
            "payload" => {
                payload_len = Some(
                    rest.trim()
                        .parse()
                        .map_err(|_| malformed(format!("bad payload line `{rest}`")))?,
                );
            }
            "sha256" => checksum = Some(rest.trim().to_string()),
            "" => {}
            other => return Err(malformed(format!("unknown header tag `{other}`"))),
        }
    }

    let payload_len = payload_len.ok_or_else(|| malformed("missing payload length".into()))?;
    if payload_bytes.len() != payload_len * 8 {
        return Err(malformed(format!(
            "payload has {} bytes, expected {}",
            payload_bytes.len(),
            payload_len * 8
        )));
    }
    let expected = checksum.ok_or_else(|| malformed("missing checksum".into()))?;
    let actual = hex::encode(Sha256::digest(payload_bytes));
    if actual != expected {
        return Err(Error::ChecksumMismatch { path: path_str });
    }

    let mut values = Vec::with_capacity(payload_len);
    for chunk in payload_bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }

    let mut off = 0;
    let mut nets = Vec::with_capacity(net_decls.len());
    for decl in net_decls {
        let hidden = decl.hidden.ok_or_else(|| malformed(format!("net `{}` missing hidden", decl.name)))?;
        let output = decl.output.ok_or_else(|| malformed(format!("net `{}` missing output", decl.name)))?;
        let mut net = Mlp::zeros(&decl.dims, hidden, output)?;
        let count = net.param_count();
        if off + count > values.len() {
            return Err(malformed(format!("payload too short for net `{}`", decl.name)));
        }
        net.set_flat_params(&values[off..off + count])?;
        off += count;
        nets.push((decl.name, net));
    }
    let mut vecs = Vec::with_capacity(vec_decls.len());
    for (name, len) in vec_decls {
        if off + len > values.len() {
            return Err(malformed(format!("payload too short for vec `{name}`")));
        }
        vecs.push((name, values[off..off + len].to_vec()));
        off += len;
    }
    if off != values.len() {
        return Err(malformed(format!(
            "payload has {} unused values",
            values.len() - off
        )));
    }

    Ok(Bundle { meta, nets, vecs })
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    bytes
        .windows(HEADER_END.len())
        .position(|w| w == HEADER_END)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let mut rng = substream(3, "checkpoint.test");
        let net =
            Mlp::new(&[3, 5, 2], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let bundle = Bundle::new()
            .with_meta("role", "probe")
            .with_net("net", net.clone())
            .with_vec("state_mean", vec![0.25, -1.5e-300]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probe.ckpt");
        save_bundle(&path, &bundle).unwrap();
        let mut loaded = load_bundle(&path).unwrap();

        assert_eq!(loaded.meta("role"), Some("probe"));
        let lnet = loaded.take_net("net", &path).unwrap();
        let bits_a: Vec<u64> = net.flat_params().iter().map(|x| x.to_bits()).collect();
        let bits_b: Vec<u64> = lnet.flat_params().iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits_a, bits_b);

        let x = [0.1, -0.4, 0.7];
        assert_eq!(net.forward(&x).unwrap(), lnet.forward(&x).unwrap());

        let v = loaded.take_vec("state_mean", &path).unwrap();
        assert_eq!(v[0].to_bits(), 0.25_f64.to_bits());
        assert_eq!(v[1].to_bits(), (-1.5e-300_f64).to_bits());
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let net = Mlp::zeros(&[2, 2], Activation::Relu, Activation::Identity).unwrap();
        let bundle = Bundle::new().with_net("net", net);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        save_bundle(&path, &bundle).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();

        assert!(matches!(
            load_bundle(&path),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn truncated_header_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.ckpt");
        std::fs::write(&path, b"hipode-checkpoint v1\nnet x\n").unwrap();
        assert!(matches!(
            load_bundle(&path),
            Err(Error::MalformedFile { .. })
        ));
    }
}
