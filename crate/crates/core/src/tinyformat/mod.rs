//! Compact `.tdes` model: a flat little-endian image of a DES-Clustering
//! system, a fixed-memory interpreter for it, and a C source emitter.
//!
//! ```text
//! offset  size          field
//! 0       4             magic "TDES"
//! 4       2             version (1)
//! 6       2             n_classes
//! 8       4             n_features
//! 12      2             pool_size (trees stored)
//! 14      2             k (clusters)
//! 16      2             J (ensemble size)
//! 18      2             reserved, zero
//! 20      4             total_nodes
//! 24      8*nf          mean f32[nf], then inv_std f32[nf]
//!         4*k*nf        centroids f32, row-major
//!         2*k*J         ensembles u16, row-major
//!         6*pool        directory: node_offset u32, node_count u16
//!         0..3          zero padding to a multiple of 4
//!         8*nodes       feature i16, threshold f32, right_jump u16
//!         4             CRC32 of every preceding byte
//! ```
//!
//! A node with feature -1 is a leaf whose class is stored in `right_jump`.
//! Otherwise the left child follows it and `right_jump` is the right child's
//! index relative to the start of its tree.

mod emit;
mod engine;

pub use emit::emit_static_source;
pub use engine::{load_tiny, TinyEngine};

use std::fmt;

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::selection::CompetenceModel;
use crate::trees::{validate_nodes, ClassifierPool, TreeNode};

pub const MAGIC: [u8; 4] = *b"TDES";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const NODE_LEN: usize = 8;
pub const DIR_ENTRY_LEN: usize = 6;
const CRC_LEN: usize = 4;

/// Byte sizes of each section for a given header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub standardizer: u64,
    pub centroids: u64,
    pub ensembles: u64,
    pub directory: u64,
    pub padding: u64,
    pub nodes: u64,
}

impl Layout {
    fn new(n_features: u64, pool: u64, k: u64, j: u64, total_nodes: u64) -> Self {
        let standardizer = 8 * n_features;
        let centroids = 4 * k * n_features;
        let ensembles = 2 * k * j;
        let directory = DIR_ENTRY_LEN as u64 * pool;
        let before = HEADER_LEN as u64 + standardizer + centroids + ensembles + directory;
        Layout {
            standardizer,
            centroids,
            ensembles,
            directory,
            padding: (4 - before % 4) % 4,
            nodes: NODE_LEN as u64 * total_nodes,
        }
    }

    /// Model payload, excluding header, padding and checksum.
    pub fn rom_estimate(&self) -> u64 {
        self.standardizer + self.centroids + self.ensembles + self.directory + self.nodes
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + self.rom_estimate() + self.padding + CRC_LEN as u64
    }
}

/// A validated, decoded `.tdes` model.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyModel {
    n_features: usize,
    n_classes: usize,
    k: usize,
    j: usize,
    mean: Vec<f32>,
    inv_std: Vec<f32>,
    centroids: Vec<f32>,
    ensembles: Vec<u16>,
    /// `(node_offset, node_count)` per stored tree.
    directory: Vec<(u32, u16)>,
    nodes: Vec<TreeNode>,
}

impl TinyModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn pool_size(&self) -> usize {
        self.directory.len()
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn inv_std(&self) -> &[f32] {
        &self.inv_std
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.n_features..(c + 1) * self.n_features]
    }

    /// Ensemble of cluster `c` as indices into the stored trees.
    pub fn ensemble(&self, c: usize) -> &[u16] {
        &self.ensembles[c * self.j..(c + 1) * self.j]
    }

    pub fn ensembles(&self) -> &[u16] {
        &self.ensembles
    }

    pub fn directory(&self) -> &[(u32, u16)] {
        &self.directory
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn tree_nodes(&self, t: usize) -> &[TreeNode] {
        let (off, count) = self.directory[t];
        &self.nodes[off as usize..off as usize + count as usize]
    }

    pub fn layout(&self) -> Layout {
        Layout::new(
            self.n_features as u64,
            self.directory.len() as u64,
            self.k as u64,
            self.j as u64,
            self.nodes.len() as u64,
        )
    }

    /// Encodes the model, checksum included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = self.layout();
        let mut out = Vec::with_capacity(layout.file_len() as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_classes as u16).to_le_bytes());
        out.extend_from_slice(&(self.n_features as u32).to_le_bytes());
        out.extend_from_slice(&(self.directory.len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.k as u16).to_le_bytes());
        out.extend_from_slice(&(self.j as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(self.nodes.len() as u32).to_le_bytes());
        for v in self.mean.iter().chain(&self.inv_std).chain(&self.centroids) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for e in &self.ensembles {
            out.extend_from_slice(&e.to_le_bytes());
        }
        for (off, count) in &self.directory {
            out.extend_from_slice(&off.to_le_bytes());
            out.extend_from_slice(&count.to_le_bytes());
        }
        out.resize(out.len() + layout.padding as usize, 0);
        for n in &self.nodes {
            out.extend_from_slice(&n.feature.to_le_bytes());
            out.extend_from_slice(&n.threshold.to_le_bytes());
            out.extend_from_slice(&n.right_jump.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Decodes and fully validates a model image.
    ///
    /// Checks run in order: length, magic and version, declared size against
    /// the buffer length (all `Format`), then the checksum (`Checksum`), then
    /// every index and tree structure (`ModelCorrupt`).
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + CRC_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than a header",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u16();
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n_classes = r.u16() as usize;
        let n_features = r.u32() as usize;
        let pool = r.u16() as usize;
        let k = r.u16() as usize;
        let j = r.u16() as usize;
        let reserved = r.u16();
        let total_nodes = r.u32() as usize;
        let layout = Layout::new(
            n_features as u64,
            pool as u64,
            k as u64,
            j as u64,
            total_nodes as u64,
        );
        if layout.file_len() != bytes.len() as u64 {
            return Err(Error::Format(format!(
                "header declares {} bytes, buffer has {}",
                layout.file_len(),
                bytes.len()
            )));
        }
        let body = bytes.len() - CRC_LEN;
        let stored = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..body]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let corrupt = |msg: String| Err(Error::ModelCorrupt(msg));
        if reserved != 0 {
            return corrupt(format!("reserved field is {reserved}"));
        }
        if n_classes == 0 || n_features == 0 || pool == 0 || k == 0 || j == 0 || total_nodes == 0 {
            return corrupt("zero-sized dimension in header".into());
        }
        if n_features > i16::MAX as usize + 1 {
            return corrupt(format!("{n_features} features exceed node feature range"));
        }
        let mean = r.f32s(n_features);
        let inv_std = r.f32s(n_features);
        let centroids = r.f32s(k * n_features);
        if mean
            .iter()
            .chain(&inv_std)
            .chain(&centroids)
            .any(|v| !v.is_finite())
        {
            return corrupt("non-finite standardizer or centroid value".into());
        }
        let ensembles: Vec<u16> = (0..k * j).map(|_| r.u16()).collect();
        let directory: Vec<(u32, u16)> = (0..pool).map(|_| (r.u32(), r.u16())).collect();
        if bytes[r.pos..r.pos + layout.padding as usize]
            .iter()
            .any(|&b| b != 0)
        {
            return corrupt("non-zero padding".into());
        }
        r.pos += layout.padding as usize;
        let nodes: Vec<TreeNode> = (0..total_nodes)
            .map(|_| TreeNode {
                feature: r.i16(),
                threshold: r.f32(),
                right_jump: r.u16(),
            })
            .collect();
        debug_assert_eq!(r.pos, body);

        for (c, row) in ensembles.chunks(j).enumerate() {
            for (i, &e) in row.iter().enumerate() {
                if e as usize >= pool {
                    return corrupt(format!("cluster {c}: tree {e} past directory of {pool}"));
                }
                if row[..i].contains(&e) {
                    return corrupt(format!("cluster {c}: tree {e} repeated"));
                }
            }
        }
        let mut expected_offset = 0usize;
        for (t, &(off, count)) in directory.iter().enumerate() {
            if off as usize != expected_offset || count == 0 {
                return corrupt(format!(
                    "tree {t}: directory entry ({off}, {count}) not contiguous"
                ));
            }
            expected_offset += count as usize;
            if expected_offset > total_nodes {
                return corrupt(format!("tree {t}: extends past {total_nodes} nodes"));
            }
            let tree = &nodes[off as usize..expected_offset];
            validate_nodes(tree, n_features, n_classes)
                .map_err(|e| Error::ModelCorrupt(format!("tree {t}: {e}")))?;
        }
        if expected_offset != total_nodes {
            return corrupt(format!(
                "directory covers {expected_offset} of {total_nodes} nodes"
            ));
        }
        if nodes.iter().any(|n| !n.threshold.is_finite()) {
            return corrupt("non-finite threshold".into());
        }
        Ok(TinyModel {
            n_features,
            n_classes,
            k,
            j,
            mean,
            inv_std,
            centroids,
            ensembles,
            directory,
            nodes,
        })
    }

    /// Sidecar description; `remap[new] = old` pool index when known.
    pub fn manifest(&self, remap: Option<&[usize]>) -> Manifest {
        let bytes = self.to_bytes();
        let crc = u32::from_le_bytes(bytes[bytes.len() - CRC_LEN..].try_into().expect("4 bytes"));
        Manifest {
            n_features: self.n_features,
            n_classes: self.n_classes,
            k: self.k,
            j: self.j,
            pool_size: self.pool_size(),
            total_nodes: self.nodes.len(),
            layout: self.layout(),
            crc32: crc,
            remap: remap.map(<[usize]>::to_vec),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N]
            .try_into()
            .expect("length checked");
        self.pos += N;
        out
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }

    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }

    fn f32s(&mut self, n: usize) -> Vec<f32> {
        (0..n).map(|_| self.f32()).collect()
    }
}

/// Human-readable sidecar written next to a `.tdes` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub n_features: usize,
    pub n_classes: usize,
    pub k: usize,
    pub j: usize,
    pub pool_size: usize,
    pub total_nodes: usize,
    pub layout: Layout,
    pub crc32: u32,
    /// Stored tree index to source pool index.
    pub remap: Option<Vec<usize>>,
}

impl Manifest {
    pub fn file_len(&self) -> u64 {
        self.layout.file_len()
    }
}

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = &self.layout;
        writeln!(f, "format = tdes")?;
        writeln!(f, "version = {VERSION}")?;
        writeln!(f, "file_len = {}", l.file_len())?;
        writeln!(f, "crc32 = {:#010x}", self.crc32)?;
        writeln!(f, "n_features = {}", self.n_features)?;
        writeln!(f, "n_classes = {}", self.n_classes)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "j = {}", self.j)?;
        writeln!(f, "pool_size = {}", self.pool_size)?;
        writeln!(f, "total_nodes = {}", self.total_nodes)?;
        writeln!(f, "section.header = {HEADER_LEN}")?;
        writeln!(f, "section.standardizer = {}", l.standardizer)?;
        writeln!(f, "section.centroids = {}", l.centroids)?;
        writeln!(f, "section.ensembles = {}", l.ensembles)?;
        writeln!(f, "section.directory = {}", l.directory)?;
        writeln!(f, "section.padding = {}", l.padding)?;
        writeln!(f, "section.nodes = {}", l.nodes)?;
        writeln!(f, "checksum = {CRC_LEN}")?;
        writeln!(f, "rom_estimate = {}", l.rom_estimate())?;
        if let Some(remap) = &self.remap {
            writeln!(f, "remap.count = {}", remap.len())?;
            for (new, old) in remap.iter().enumerate() {
                writeln!(f, "remap.{new} = {old}")?;
            }
        }
        Ok(())
    }
}

/// Output of [`export_tiny`].
#[derive(Debug, Clone, PartialEq)]
pub struct TinyExport {
    pub bytes: Vec<u8>,
    pub model: TinyModel,
    pub manifest: Manifest,
}

/// Packs the standardizer, competence model and the referenced pool trees.
///
/// Trees that no cluster uses are left out; the rest keep their relative
/// order and `manifest.remap` maps stored positions back to pool indices.
pub fn export_tiny(
    s: &Standardizer,
    cm: &CompetenceModel,
    pool: &ClassifierPool,
) -> Result<TinyExport> {
    let nf = s.n_features();
    if cm.kmeans().n_features() != nf {
        return Err(Error::shape(nf, cm.kmeans().n_features()));
    }
    if pool.n_features() != nf {
        return Err(Error::shape(nf, pool.n_features()));
    }
    if cm.pool_size() != pool.len() {
        return Err(Error::shape(pool.len(), cm.pool_size()));
    }
    let limit = u16::MAX as usize;
    for (what, v) in [
        ("classes", pool.n_classes()),
        ("clusters", cm.k()),
        ("ensemble size", cm.j()),
    ] {
        if v > limit {
            return Err(Error::Capacity(format!("{v} {what}, limit is {limit}")));
        }
    }
    if nf > i16::MAX as usize + 1 {
        return Err(Error::Capacity(format!(
            "{nf} features, limit is {}",
            i16::MAX as usize + 1
        )));
    }
    let mut used = vec![false; pool.len()];
    for row in cm.ensembles() {
        for &c in row {
            used[c] = true;
        }
    }
    let remap: Vec<usize> = (0..pool.len()).filter(|&c| used[c]).collect();
    if remap.len() > limit {
        return Err(Error::Capacity(format!(
            "{} classifiers, limit is {limit}",
            remap.len()
        )));
    }
    let mut new_index = vec![u16::MAX; pool.len()];
    for (new, &old) in remap.iter().enumerate() {
        new_index[old] = new as u16;
    }

    let mut directory = Vec::with_capacity(remap.len());
    let mut nodes = Vec::new();
    for &old in &remap {
        let tree = pool.tree(old).nodes();
        if tree.len() > limit {
            return Err(Error::Capacity(format!(
                "tree {old} has {} nodes, limit is {limit}",
                tree.len()
            )));
        }
        let offset = u32::try_from(nodes.len())
            .map_err(|_| Error::Capacity("node pool exceeds u32 offsets".into()))?;
        directory.push((offset, tree.len() as u16));
        nodes.extend_from_slice(tree);
    }
    if u32::try_from(nodes.len()).is_err() {
        return Err(Error::Capacity("node pool exceeds u32 count".into()));
    }
    let model = TinyModel {
        n_features: nf,
        n_classes: pool.n_classes(),
        k: cm.k(),
        j: cm.j(),
        mean: s.mean().to_vec(),
        inv_std: s.inv_std().to_vec(),
        centroids: cm.kmeans().centroids().as_slice().to_vec(),
        ensembles: cm
            .ensembles()
            .iter()
            .flat_map(|row| row.iter().map(|&c| new_index[c]))
            .collect(),
        directory,
        nodes,
    };
    let bytes = model.to_bytes();
    let manifest = model.manifest(Some(&remap));
    Ok(TinyExport {
        bytes,
        model,
        manifest,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cluster::KMeansModel;
    use crate::data::Matrix;
    use crate::selection::tests::constant_pool;

    pub(crate) fn leaf_export(class: u16) -> TinyExport {
        let s = Standardizer::from_parts(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let km = KMeansModel::from_centroids(Matrix::zeros(1, 2)).unwrap();
        let cm = CompetenceModel::from_parts(km, vec![vec![0]], 1).unwrap();
        let t = crate::trees::DecisionTree::from_nodes(
            vec![TreeNode::leaf(class)],
            2,
            class as usize + 1,
        )
        .unwrap();
        let pool = ClassifierPool::new(vec![t], vec![0], 0).unwrap();
        export_tiny(&s, &cm, &pool).unwrap()
    }

    #[test]
    fn single_leaf_file_size() {
        let e = leaf_export(3);
        // 24 header + 16 standardizer + 8 centroid + 2 ensemble + 6 directory
        // = 56, already aligned, + 8 node + 4 crc
        assert_eq!(e.bytes.len(), 68);
        assert_eq!(e.manifest.layout.padding, 0);
        assert_eq!(e.manifest.file_len(), 68);
        assert_eq!(&e.bytes[..4], b"TDES");
        assert_eq!(TinyModel::from_bytes(&e.bytes).unwrap(), e.model);
    }

    #[test]
    fn documented_example_is_exact() {
        let doc = include_str!("../../../../docs/FORMAT.md");
        let dump = doc
            .split("```text\n")
            .nth(1)
            .unwrap()
            .split("```")
            .next()
            .unwrap();
        let bytes: Vec<u8> = dump
            .lines()
            .flat_map(|l| l.split_whitespace().skip(1))
            .map(|h| u8::from_str_radix(h, 16).unwrap())
            .collect();
        assert_eq!(bytes, leaf_export(3).bytes);
    }

    #[test]
    fn padding_fills_to_four_bytes() {
        // k = 1, J = 2, pool 2, nf 1: 24 + 8 + 4 + 4 + 12 = 52, no pad;
        // k = 1, J = 1, pool 2: 24 + 8 + 4 + 2 + 12 = 50, pad 2
        let l = Layout::new(1, 2, 1, 1, 2);
        assert_eq!(l.padding, 2);
        assert_eq!(l.file_len(), 50 + 2 + 16 + 4);
        assert_eq!(Layout::new(1, 2, 1, 2, 2).padding, 0);
    }

    #[test]
    fn section_sizes_sum_to_body() {
        let s = Standardizer::from_parts(vec![0.5], vec![2.0]).unwrap();
        let km =
            KMeansModel::from_centroids(Matrix::new(3, 1, vec![-1.0, 0.0, 1.0]).unwrap()).unwrap();
        let cm = CompetenceModel::from_parts(km, vec![vec![0], vec![2], vec![4]], 5).unwrap();
        let e = export_tiny(&s, &cm, &constant_pool(&[0, 1, 0, 1, 1], 2)).unwrap();
        let text = e.manifest.to_string();
        let total: u64 = text
            .lines()
            .filter(|l| l.starts_with("section."))
            .map(|l| l.rsplit(" = ").next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, e.bytes.len() as u64 - 4);
        assert!(text.contains("remap.count = 3\nremap.0 = 0\nremap.1 = 2\nremap.2 = 4\n"));
        assert_eq!(e.model.pool_size(), 3);
        assert_eq!(e.model.ensembles(), &[0, 1, 2]);
    }

    #[test]
    fn export_is_deterministic() {
        assert_eq!(leaf_export(1).bytes, leaf_export(1).bytes);
    }

    fn recrc(bytes: &mut [u8]) {
        let body = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
    }

    #[test]
    fn load_errors() {
        let good = leaf_export(0).bytes;
        assert!(matches!(
            TinyModel::from_bytes(&good[..40]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            TinyModel::from_bytes(&good[..10]),
            Err(Error::Format(_))
        ));
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(TinyModel::from_bytes(&b), Err(Error::Format(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(TinyModel::from_bytes(&b), Err(Error::Format(_))));
        for i in HEADER_LEN..good.len() {
            let mut b = good.clone();
            b[i] ^= 0x10;
            assert!(
                matches!(TinyModel::from_bytes(&b), Err(Error::Checksum { .. })),
                "byte {i}"
            );
        }
        // ensemble entry past the directory, with a valid checksum
        let mut b = good.clone();
        b[48] = 1;
        recrc(&mut b);
        assert!(matches!(
            TinyModel::from_bytes(&b),
            Err(Error::ModelCorrupt(_))
        ));
        // leaf class out of range
        let mut b = good;
        b[62] = 9;
        recrc(&mut b);
        assert!(matches!(
            TinyModel::from_bytes(&b),
            Err(Error::ModelCorrupt(_))
        ));
    }

    #[test]
    fn capacity_limits() {
        let s = Standardizer::from_parts(vec![0.0], vec![1.0]).unwrap();
        let km = KMeansModel::from_centroids(Matrix::zeros(1, 1)).unwrap();
        let n = u16::MAX as usize + 1;
        let cm = CompetenceModel::from_parts(km, vec![(0..n).collect()], n).unwrap();
        let pool = constant_pool(&vec![0; n], 1);
        assert!(matches!(
            export_tiny(&s, &cm, &pool),
            Err(Error::Capacity(_))
        ));
    }
}
