//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "UMTR" | version u16 | payload length u64 | payload | crc32 u32
//! ```
//!
//! The CRC covers every byte before it. The payload holds the config block,
//! the schema block, then per feature its coding, training range, marginal
//! and classifier. Strings are a u32 byte length followed by UTF-8.

use std::fs;
use std::path::Path;

use super::{EngineConfig, UnmaskingModel};
use crate::coding::FeatureCoding;
use crate::dataset::{FeatureKind, Field, Schema};
use crate::discretizer::BinSpec;
use crate::error::{Error, Result};
use crate::gbdt::{BoostedClassifier, GbdtParams, Tree, TreeNode};

pub const MAGIC: [u8; 4] = *b"UMTR";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 8;

const CODING_BINNED: u8 = 0;
const CODING_CONSTANT: u8 = 1;
const CODING_CATEGORICAL: u8 = 2;

pub fn save_model(model: &UnmaskingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<UnmaskingModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

impl UnmaskingModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        from_bytes(bytes)
    }
}

fn to_bytes(model: &UnmaskingModel) -> Vec<u8> {
    let mut p = Writer::default();
    write_config(&mut p, model.config());
    write_schema(&mut p, model.schema());
    for j in 0..model.n_features() {
        write_coding(&mut p, &model.codings()[j]);
        let (lo, hi) = model.train_ranges()[j];
        p.f64(lo);
        p.f64(hi);
        p.u32(model.marginals()[j].len() as u32);
        for &q in &model.marginals()[j] {
            p.f64(q);
        }
        write_classifier(&mut p, &model.classifiers()[j]);
    }

    let mut out = Vec::with_capacity(HEADER_LEN + p.buf.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(p.buf.len() as u64).to_le_bytes());
    out.extend_from_slice(&p.buf);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn from_bytes(bytes: &[u8]) -> Result<UnmaskingModel> {
    if bytes.len() < 4 {
        return Err(Error::Truncated);
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 6 {
        return Err(Error::Truncated);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    let payload_len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let body_end = (HEADER_LEN as u64).checked_add(payload_len).ok_or(Error::Truncated)?;
    if (bytes.len() as u64) < body_end + 4 {
        return Err(Error::Truncated);
    }
    let body_end = body_end as usize;
    if bytes.len() > body_end + 4 {
        return Err(Error::Malformed(format!("{} bytes after the checksum", bytes.len() - body_end - 4)));
    }
    let stored = u32::from_le_bytes(bytes[body_end..body_end + 4].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader {
        buf: &bytes[HEADER_LEN..body_end],
        pos: 0,
    };
    let config = read_config(&mut r)?;
    let schema = read_schema(&mut r)?;
    let d = schema.len();
    let mut codings = Vec::with_capacity(d);
    let mut ranges = Vec::with_capacity(d);
    let mut marginals = Vec::with_capacity(d);
    let mut classifiers = Vec::with_capacity(d);
    for _ in 0..d {
        codings.push(read_coding(&mut r)?);
        ranges.push((r.f64()?, r.f64()?));
        let c = r.len()?;
        marginals.push((0..c).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        classifiers.push(read_classifier(&mut r, &config.tree)?);
    }
    if r.pos != r.buf.len() {
        return Err(Error::Malformed("payload has unread bytes".into()));
    }
    UnmaskingModel::from_parts(schema, codings, classifiers, marginals, config, ranges)
}

fn write_config(p: &mut Writer, c: &EngineConfig) {
    p.u64(c.n_bins as u64);
    p.f64(c.top_p);
    p.u64(c.k_dup as u64);
    p.f64(c.alpha);
    p.u64(c.seed);
    let t = &c.tree;
    p.u64(t.rounds as u64);
    p.f64(t.learning_rate);
    p.u64(t.max_depth as u64);
    p.f64(t.min_child_weight);
    p.f64(t.lambda);
    p.u64(t.n_hist_bins as u64);
    p.u8(t.exact as u8);
}

fn read_config(r: &mut Reader) -> Result<EngineConfig> {
    Ok(EngineConfig {
        n_bins: r.u64()? as usize,
        top_p: r.f64()?,
        k_dup: r.u64()? as usize,
        alpha: r.f64()?,
        seed: r.u64()?,
        tree: GbdtParams {
            rounds: r.u64()? as usize,
            learning_rate: r.f64()?,
            max_depth: r.u64()? as usize,
            min_child_weight: r.f64()?,
            lambda: r.f64()?,
            n_hist_bins: r.u64()? as usize,
            exact: r.bool()?,
        },
    })
}

fn write_schema(p: &mut Writer, s: &Schema) {
    p.u32(s.len() as u32);
    for f in s.fields() {
        p.str(&f.name);
        match f.kind {
            FeatureKind::Continuous => {
                p.u8(0);
                p.u32(0);
            }
            FeatureKind::Categorical { cardinality } => {
                p.u8(1);
                p.u32(cardinality);
            }
        }
        p.u32(f.labels.len() as u32);
        for l in &f.labels {
            p.str(l);
        }
    }
}

fn read_schema(r: &mut Reader) -> Result<Schema> {
    let d = r.len()?;
    let mut fields = Vec::with_capacity(d);
    for _ in 0..d {
        let name = r.str()?;
        let kind = match (r.u8()?, r.u32()?) {
            (0, _) => FeatureKind::Continuous,
            (1, cardinality) => FeatureKind::Categorical { cardinality },
            (tag, _) => return Err(Error::Malformed(format!("unknown feature kind {tag}"))),
        };
        let n_labels = r.len()?;
        let labels = (0..n_labels).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        fields.push(Field { name, kind, labels });
    }
    Schema::new(fields).map_err(|e| Error::Malformed(e.to_string()))
}

fn write_coding(p: &mut Writer, c: &FeatureCoding) {
    match c {
        FeatureCoding::Binned(spec) => {
            p.u8(CODING_BINNED);
            p.u32(spec.n_bins() as u32);
            for &e in spec.edges() {
                p.f64(e);
            }
            p.f64(spec.alpha());
        }
        FeatureCoding::Constant(v) => {
            p.u8(CODING_CONSTANT);
            p.f64(*v);
        }
        FeatureCoding::Categorical { cardinality } => {
            p.u8(CODING_CATEGORICAL);
            p.u32(*cardinality);
        }
    }
}

fn read_coding(r: &mut Reader) -> Result<FeatureCoding> {
    match r.u8()? {
        CODING_BINNED => {
            let b = r.len()?;
            let edges = (0..=b).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let alpha = r.f64()?;
            let spec = BinSpec::from_edges(edges, alpha).map_err(|e| Error::Malformed(e.to_string()))?;
            Ok(FeatureCoding::Binned(spec))
        }
        CODING_CONSTANT => {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(Error::Malformed("constant feature value is not finite".into()));
            }
            Ok(FeatureCoding::Constant(v))
        }
        CODING_CATEGORICAL => Ok(FeatureCoding::Categorical { cardinality: r.u32()? }),
        tag => Err(Error::Malformed(format!("unknown coding tag {tag}"))),
    }
}

fn write_classifier(p: &mut Writer, c: &BoostedClassifier) {
    p.u32(c.n_classes() as u32);
    p.u32(c.n_features() as u32);
    match c.constant_class() {
        Some(k) => {
            p.u8(1);
            p.u32(k);
        }
        None => {
            p.u8(0);
            p.u32(0);
        }
    }
    for &b in c.base_score() {
        p.f64(b);
    }
    p.u32(c.trees().len() as u32);
    for tree in c.trees() {
        p.u32(tree.nodes().len() as u32);
        for n in tree.nodes() {
            p.u32(n.split_feature);
            p.f64(n.split_threshold);
            p.u8(n.default_left as u8);
            p.u8(n.is_leaf as u8);
            p.f64(n.leaf_value);
        }
    }
}

fn read_classifier(r: &mut Reader, params: &GbdtParams) -> Result<BoostedClassifier> {
    let n_classes = r.len()?;
    let n_features = r.len()?;
    let constant = r.bool()?;
    let k = r.u32()?;
    let base_score = (0..n_classes).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let n_trees = r.len()?;
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let n_nodes = r.len()?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
        for _ in 0..n_nodes {
            nodes.push(TreeNode {
                split_feature: r.u32()?,
                split_threshold: r.f64()?,
                default_left: r.bool()?,
                is_leaf: r.bool()?,
                leaf_value: r.f64()?,
            });
        }
        trees.push(Tree::from_preorder(nodes)?);
    }
    BoostedClassifier::from_parts(
        n_classes,
        n_features,
        params.clone(),
        base_score,
        trees,
        constant.then_some(k),
    )
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Malformed("payload ends early".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Malformed(format!("expected a 0/1 flag, found {b}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A u32 count, bounded by the bytes left so corrupt counts cannot
    /// trigger huge allocations.
    fn len(&mut self) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > self.buf.len() - self.pos {
            return Err(Error::Malformed(format!("count {n} exceeds remaining payload")));
        }
        Ok(n)
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Malformed("string is not UTF-8".into()))
    }
}
