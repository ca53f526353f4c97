//! Labeled feature-tensor datasets: end-to-end generation, a checksummed
//! binary file format, and stratified train/validation/test splits.
//!
//! Each record is one received frame pushed through the full recognition
//! front end: a random message is encoded under its true candidate,
//! modulated, impaired by the configured channel at one SNR point, soft
//! demodulated, decoded under *every* candidate, and stacked into an
//! `s x s x m` evidence tensor. The tensor — not the raw frame — is what
//! gets persisted, so the decoder-bank cost is paid once per dataset.
//!
//! Record order is frozen: channel configs in the order given, then SNR
//! ascending, then class ascending, then frame index. Every record carries
//! its own hash-derived seed, making single frames reproducible in
//! isolation and the whole file byte-identical across runs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::channel::{self, ChannelConfig};
use crate::codebook::{CandidateSet, Scheme};
use crate::features::{self, EvidenceSource, FeatureTensor};
use crate::fec::{self, DecoderConfig};
use crate::rng;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CRDS";
const VERSION: u32 = 1;
const LLR_MAGIC: &[u8; 4] = b"CRLL";

/// Frames per (channel, SNR, class) cell when no count is given. The
/// full-scale figure of 100,000 is reachable through the same APIs.
pub const DEFAULT_FRAMES_PER_CELL: usize = 5_000;

/// Sub-seed stream for the frame's message bits.
const STREAM_MESSAGE: u64 = 1_000;
/// Sub-seed stream handed to the channel (which derives its own noise and
/// fading streams from it).
const STREAM_CHANNEL: u64 = 2_000;

/// Default SNR grid for a scheme's operating range, in dB.
pub fn default_snr_grid(scheme: Scheme) -> Vec<f64> {
    let (lo, hi) = match scheme {
        Scheme::Ldpc | Scheme::Conv => (-4i32, 8i32),
        Scheme::Turbo => (-8, 8),
        Scheme::Polar => (0, 16),
    };
    (lo..=hi).step_by(2).map(f64::from).collect()
}

// ---------------------------------------------------------------------------
// Dataset container
// ---------------------------------------------------------------------------

/// One record, viewed in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecord<'a> {
    /// Index of the true candidate.
    pub label: u16,
    pub snr_db: f32,
    /// Channel model tag (see [`channel::ChannelModel::tag`]).
    pub channel_tag: u8,
    /// Seed this frame was generated from.
    pub seed: u64,
    /// `side * side * channels` tensor values, channel-last.
    pub tensor: &'a [f32],
}

/// A full dataset in column-major storage: per-record metadata arrays plus
/// one flat tensor block, which keeps memory overhead flat at scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Digest of the candidate set the tensors were computed against.
    pub digest: [u8; 32],
    /// Tensor side length `s`.
    pub side: usize,
    /// Tensor channel count `m`.
    pub channels: usize,
    pub labels: Vec<u16>,
    pub snrs_db: Vec<f32>,
    pub channel_tags: Vec<u8>,
    pub seeds: Vec<u64>,
    /// `len() * side * side * channels` values, record-major.
    pub tensors: Vec<f32>,
}

impl Dataset {
    /// An empty dataset bound to `set`'s geometry and digest.
    pub fn empty(set: &CandidateSet) -> Self {
        Self {
            digest: set.digest(),
            side: set.tensor_side,
            channels: set.len(),
            labels: Vec::new(),
            snrs_db: Vec::new(),
            channel_tags: Vec::new(),
            seeds: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Values per tensor.
    pub fn tensor_len(&self) -> usize {
        self.side * self.side * self.channels
    }

    /// The `i`-th tensor as a flat slice.
    pub fn tensor(&self, i: usize) -> &[f32] {
        let len = self.tensor_len();
        &self.tensors[i * len..(i + 1) * len]
    }

    /// The `i`-th record.
    pub fn record(&self, i: usize) -> DatasetRecord<'_> {
        DatasetRecord {
            label: self.labels[i],
            snr_db: self.snrs_db[i],
            channel_tag: self.channel_tags[i],
            seed: self.seeds[i],
            tensor: self.tensor(i),
        }
    }

    /// The `i`-th tensor as an owned [`FeatureTensor`].
    pub fn feature_tensor(&self, i: usize) -> FeatureTensor {
        FeatureTensor::from_raw(self.side, self.channels, self.tensor(i).to_vec())
            .expect("stored tensor dimensions are consistent")
    }

    /// Distinct SNR points, ascending.
    pub fn snr_points(&self) -> Vec<f32> {
        let mut points: Vec<f32> = Vec::new();
        for &s in &self.snrs_db {
            if !points.contains(&s) {
                points.push(s);
            }
        }
        points.sort_by(f32::total_cmp);
        points
    }

    /// Errors unless the dataset was generated against `set`.
    pub fn check_digest(&self, set: &CandidateSet) -> Result<()> {
        if self.digest != set.digest() {
            return Err(Error::format(
                "dataset was generated against a different candidate set than the one configured",
            ));
        }
        Ok(())
    }

    fn push(&mut self, label: u16, snr_db: f32, channel_tag: u8, seed: u64, tensor: &[f32]) {
        debug_assert_eq!(tensor.len(), self.tensor_len());
        self.labels.push(label);
        self.snrs_db.push(snr_db);
        self.channel_tags.push(channel_tag);
        self.seeds.push(seed);
        self.tensors.extend_from_slice(tensor);
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Raw LLR frames optionally retained next to a dataset, for
/// feature-definition experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrArchive {
    pub records: Vec<LlrRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrRecord {
    pub label: u16,
    pub seed: u64,
    pub llrs: Vec<f32>,
}

fn validate_generation(
    set: &CandidateSet,
    channels: &[ChannelConfig],
    snr_grid: &[f64],
    frames_per_cell: usize,
) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::argument("candidate set is empty"));
    }
    if channels.is_empty() {
        return Err(Error::argument("at least one channel configuration is required"));
    }
    for config in channels {
        config.validate()?;
    }
    if snr_grid.is_empty() {
        return Err(Error::argument("the SNR grid is empty"));
    }
    if snr_grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::argument("SNR grid values must be finite"));
    }
    if frames_per_cell == 0 {
        return Err(Error::argument("frames per cell must be at least 1"));
    }
    let mut grid = snr_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Generates `frames_per_cell` records for every (channel, SNR, class) cell.
///
/// Every frame's randomness is derived from `master_seed` and the frame's
/// global index, so regeneration is byte-identical and any single record can
/// be re-simulated from its stored seed.
pub fn generate(
    set: &CandidateSet,
    channels: &[ChannelConfig],
    snr_grid: &[f64],
    frames_per_cell: usize,
    master_seed: u64,
    decoder: &DecoderConfig,
    source: EvidenceSource,
) -> Result<Dataset> {
    Ok(generate_inner(set, channels, snr_grid, frames_per_cell, master_seed, decoder, source, false)?.0)
}

/// Like [`generate`], also returning the raw demodulated LLR frames.
pub fn generate_with_llrs(
    set: &CandidateSet,
    channels: &[ChannelConfig],
    snr_grid: &[f64],
    frames_per_cell: usize,
    master_seed: u64,
    decoder: &DecoderConfig,
    source: EvidenceSource,
) -> Result<(Dataset, LlrArchive)> {
    let (dataset, archive) =
        generate_inner(set, channels, snr_grid, frames_per_cell, master_seed, decoder, source, true)?;
    Ok((dataset, archive.expect("archive requested")))
}

#[allow(clippy::too_many_arguments)]
fn generate_inner(
    set: &CandidateSet,
    channels: &[ChannelConfig],
    snr_grid: &[f64],
    frames_per_cell: usize,
    master_seed: u64,
    decoder: &DecoderConfig,
    source: EvidenceSource,
    keep_llrs: bool,
) -> Result<(Dataset, Option<LlrArchive>)> {
    let grid = validate_generation(set, channels, snr_grid, frames_per_cell)?;
    let mut dataset = Dataset::empty(set);
    let total = channels.len() * grid.len() * set.len() * frames_per_cell;
    dataset.labels.reserve(total);
    dataset.snrs_db.reserve(total);
    dataset.channel_tags.reserve(total);
    dataset.seeds.reserve(total);
    dataset.tensors.reserve(total * dataset.tensor_len());
    let mut archive = keep_llrs.then(|| LlrArchive { records: Vec::with_capacity(total) });

    let mut global_index = 0u64;
    for base in channels {
        for &snr in &grid {
            let mut config = base.clone();
            config.snr_db = snr;
            let sigma2 = config.noise_sigma2();
            for (class, candidate) in set.candidates.iter().enumerate() {
                for _ in 0..frames_per_cell {
                    let frame_seed = rng::derive_seed(master_seed, global_index);
                    global_index += 1;

                    let mut message_rng =
                        rng::chacha(rng::derive_seed(frame_seed, STREAM_MESSAGE));
                    let message = fec::random_message(candidate.message_len, &mut message_rng);
                    let codeword = fec::encode(candidate, &message)?;
                    let symbols = channel::modulate_bpsk(&codeword);
                    let received = channel::apply_channel(
                        &symbols,
                        &config,
                        rng::derive_seed(frame_seed, STREAM_CHANNEL),
                    )?;
                    let llrs = channel::demodulate_llr(&received, sigma2)?;
                    let bank = features::candidate_evidence(&llrs, set, decoder, source)?;
                    let tensor = features::reshape_stack(&bank);
                    dataset.push(
                        class as u16,
                        snr as f32,
                        config.model.tag(),
                        frame_seed,
                        tensor.data(),
                    );
                    if let Some(archive) = archive.as_mut() {
                        archive.records.push(LlrRecord {
                            label: class as u16,
                            seed: frame_seed,
                            llrs: llrs.iter().map(|&l| l as f32).collect(),
                        });
                    }
                }
            }
        }
    }
    Ok((dataset, archive))
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.6, validation: 0.2, test: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&f| !(f.is_finite() && f > 0.0)) {
            return Err(Error::argument("split fractions must be positive"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::argument(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Splits `dataset` into train/validation/test index lists, stratified per
/// (channel, SNR, class) cell so every cell contributes the same fractions.
///
/// Deterministic: each cell is shuffled with a seed derived from the spec
/// seed and the cell's ordinal.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::argument("cannot split an empty dataset"));
    }

    // Cells in first-appearance order (the generation order is frozen, so
    // this is deterministic).
    let mut cell_of: HashMap<(u8, u32, u16), usize> = HashMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_keys: Vec<(u8, f32, u16)> = Vec::new();
    for i in 0..dataset.len() {
        let key = (dataset.channel_tags[i], dataset.snrs_db[i].to_bits(), dataset.labels[i]);
        let slot = *cell_of.entry(key).or_insert_with(|| {
            cells.push(Vec::new());
            cell_keys.push((dataset.channel_tags[i], dataset.snrs_db[i], dataset.labels[i]));
            cells.len() - 1
        });
        cells[slot].push(i);
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (ordinal, indices) in cells.iter().enumerate() {
        let n = indices.len();
        let n_train = (n as f64 * spec.train).floor() as usize;
        let n_val = (n as f64 * spec.validation).floor() as usize;
        let n_test = n - n_train - n_val;
        if n_train == 0 || n_val == 0 || n_test == 0 {
            let (tag, snr, class) = cell_keys[ordinal];
            return Err(Error::argument(format!(
                "cell (channel tag {tag}, {snr} dB, class {class}) has only {n} records, \
                 too few to split {}/{}/{}",
                spec.train, spec.validation, spec.test
            )));
        }
        let mut shuffled = indices.clone();
        let mut cell_rng = rng::chacha(rng::derive_seed(spec.seed, ordinal as u64));
        rng::shuffle(&mut shuffled, &mut cell_rng);
        train.extend_from_slice(&shuffled[..n_train]);
        validation.extend_from_slice(&shuffled[n_train..n_train + n_val]);
        test.extend_from_slice(&shuffled[n_train + n_val..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok((train, validation, test))
}

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3, reflected)
// ---------------------------------------------------------------------------

fn crc32_table() -> &'static [u32; 256] {
    static TABLE: OnceLock<[u32; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u32; 256];
        for (i, entry) in table.iter_mut().enumerate() {
            let mut crc = i as u32;
            for _ in 0..8 {
                crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
            }
            *entry = crc;
        }
        table
    })
}

/// CRC-32 over `bytes` (IEEE polynomial, as used by zip/png).
pub(crate) fn crc32(bytes: &[u8]) -> u32 {
    let table = crc32_table();
    !bytes.iter().fold(0xFFFF_FFFFu32, |crc, &b| {
        table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8)
    })
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

/// Writes `dataset` to `path` (streaming; one CRC-checked record at a time).
pub fn save(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&dataset.digest)?;
    out.write_all(&(dataset.side as u32).to_le_bytes())?;
    out.write_all(&(dataset.channels as u32).to_le_bytes())?;
    out.write_all(&(dataset.len() as u64).to_le_bytes())?;

    let mut record = Vec::with_capacity(15 + dataset.tensor_len() * 4);
    for i in 0..dataset.len() {
        record.clear();
        record.extend_from_slice(&dataset.labels[i].to_le_bytes());
        record.extend_from_slice(&dataset.snrs_db[i].to_le_bytes());
        record.push(dataset.channel_tags[i]);
        record.extend_from_slice(&dataset.seeds[i].to_le_bytes());
        for &v in dataset.tensor(i) {
            record.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&record)?;
        out.write_all(&crc32(&record).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact_at(
    reader: &mut impl Read,
    buf: &mut [u8],
    offset: &mut u64,
    what: &str,
) -> Result<()> {
    reader.read_exact(buf).map_err(|_| {
        Error::format(format!("dataset file truncated at byte {offset}: expected {what}"))
    })?;
    *offset += buf.len() as u64;
    Ok(())
}

/// Reads a dataset back, verifying per-record checksums.
pub fn load(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;

    let mut magic = [0u8; 4];
    read_exact_at(&mut reader, &mut magic, &mut offset, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format("dataset file magic is not \"CRDS\""));
    }
    let mut word = [0u8; 4];
    read_exact_at(&mut reader, &mut word, &mut offset, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::format(format!(
            "dataset file version {version} is not supported (expected {VERSION})"
        )));
    }
    let mut digest = [0u8; 32];
    read_exact_at(&mut reader, &mut digest, &mut offset, "candidate-set digest")?;
    read_exact_at(&mut reader, &mut word, &mut offset, "tensor side")?;
    let side = u32::from_le_bytes(word) as usize;
    read_exact_at(&mut reader, &mut word, &mut offset, "tensor channels")?;
    let channels = u32::from_le_bytes(word) as usize;
    let mut dword = [0u8; 8];
    read_exact_at(&mut reader, &mut dword, &mut offset, "record count")?;
    let count = u64::from_le_bytes(dword) as usize;
    if side == 0 || channels == 0 {
        return Err(Error::format("dataset header has a zero tensor dimension"));
    }

    let tensor_len = side * channels * side;
    let record_len = 15 + tensor_len * 4;
    let mut dataset = Dataset {
        digest,
        side,
        channels,
        labels: Vec::with_capacity(count),
        snrs_db: Vec::with_capacity(count),
        channel_tags: Vec::with_capacity(count),
        seeds: Vec::with_capacity(count),
        tensors: Vec::with_capacity(count * tensor_len),
    };

    let mut record = vec![0u8; record_len];
    let mut crc_bytes = [0u8; 4];
    for i in 0..count {
        let record_offset = offset;
        read_exact_at(&mut reader, &mut record, &mut offset, "record payload")?;
        read_exact_at(&mut reader, &mut crc_bytes, &mut offset, "record checksum")?;
        let stored = u32::from_le_bytes(crc_bytes);
        let computed = crc32(&record);
        if stored != computed {
            return Err(Error::format(format!(
                "record {i} failed its checksum (byte offset {record_offset}): \
                 stored {stored:#010x}, computed {computed:#010x}"
            )));
        }
        dataset.labels.push(u16::from_le_bytes(record[0..2].try_into().unwrap()));
        dataset.snrs_db.push(f32::from_le_bytes(record[2..6].try_into().unwrap()));
        dataset.channel_tags.push(record[6]);
        dataset.seeds.push(u64::from_le_bytes(record[7..15].try_into().unwrap()));
        for chunk in record[15..].chunks_exact(4) {
            dataset.tensors.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
    }

    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(Error::format(format!(
            "dataset file has trailing bytes after record {count} (byte offset {offset})"
        )));
    }
    Ok(dataset)
}

/// Writes an LLR archive next to a dataset.
pub fn save_llrs(archive: &LlrArchive, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(LLR_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(archive.records.len() as u64).to_le_bytes())?;
    let mut record = Vec::new();
    for r in &archive.records {
        record.clear();
        record.extend_from_slice(&r.label.to_le_bytes());
        record.extend_from_slice(&r.seed.to_le_bytes());
        record.extend_from_slice(&(r.llrs.len() as u32).to_le_bytes());
        for &v in &r.llrs {
            record.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&record)?;
        out.write_all(&crc32(&record).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an LLR archive.
pub fn load_llrs(path: &Path) -> Result<LlrArchive> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 16 || &bytes[0..4] != LLR_MAGIC {
        return Err(Error::format("LLR file magic is not \"CRLL\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(format!("LLR file version {version} is not supported")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let mut pos = 16usize;
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let need = |pos: usize, len: usize| -> Result<()> {
            if pos + len > bytes.len() {
                Err(Error::format(format!("LLR file truncated in record {i} at byte {pos}")))
            } else {
                Ok(())
            }
        };
        need(pos, 14)?;
        let label = u16::from_le_bytes(bytes[pos..pos + 2].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[pos + 2..pos + 10].try_into().unwrap());
        let len = u32::from_le_bytes(bytes[pos + 10..pos + 14].try_into().unwrap()) as usize;
        need(pos, 14 + len * 4 + 4)?;
        let mut llrs = Vec::with_capacity(len);
        for chunk in bytes[pos + 14..pos + 14 + len * 4].chunks_exact(4) {
            llrs.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        let body_end = pos + 14 + len * 4;
        let stored = u32::from_le_bytes(bytes[body_end..body_end + 4].try_into().unwrap());
        if stored != crc32(&bytes[pos..body_end]) {
            return Err(Error::format(format!("LLR record {i} failed its checksum")));
        }
        records.push(LlrRecord { label, seed, llrs });
        pos = body_end + 4;
    }
    if pos != bytes.len() {
        return Err(Error::format("LLR file has trailing bytes"));
    }
    Ok(LlrArchive { records })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::fec::tests::set_for;

    fn awgn() -> ChannelConfig {
        ChannelConfig::default()
    }

    fn quick_decoder() -> DecoderConfig {
        DecoderConfig { bp_iterations: 10, ..DecoderConfig::default() }
    }

    #[test]
    fn crc32_matches_the_standard_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }

    #[test]
    fn generation_is_balanced_and_ordered() {
        let set = set_for(Scheme::Conv);
        let snrs = [4.0, -2.0]; // deliberately unsorted
        let ds = generate(
            &set,
            &[awgn()],
            &snrs,
            3,
            99,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        assert_eq!(ds.len(), 2 * 7 * 3);
        // Frozen order: snr ascending, then class ascending, then frame.
        for (i, r) in (0..ds.len()).map(|i| (i, ds.record(i))) {
            let snr_block = i / (7 * 3);
            let class = (i / 3) % 7;
            assert_eq!(r.snr_db, if snr_block == 0 { -2.0 } else { 4.0 });
            assert_eq!(r.label, class as u16);
            assert_eq!(r.channel_tag, ChannelModel::Awgn.tag());
        }
        // Exact balance per cell and unique seeds.
        let mut seeds = ds.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), ds.len());
        // Tensor entries respect the clipping bound.
        assert!(ds.tensors.iter().all(|v| v.abs() <= 20.0));
        assert_eq!(ds.snr_points(), vec![-2.0, 4.0]);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let set = set_for(Scheme::Conv);
        let make = |seed| {
            generate(
                &set,
                &[awgn()],
                &[0.0],
                2,
                seed,
                &quick_decoder(),
                EvidenceSource::ReencodeAgreement,
            )
            .unwrap()
        };
        let a = make(7);
        let b = make(7);
        let c = make(8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_generation_inputs_are_rejected() {
        let set = set_for(Scheme::Conv);
        let d = quick_decoder();
        let src = EvidenceSource::ReencodeAgreement;
        assert!(generate(&set, &[], &[0.0], 1, 0, &d, src).is_err());
        assert!(generate(&set, &[awgn()], &[], 1, 0, &d, src).is_err());
        assert!(generate(&set, &[awgn()], &[f64::NAN], 1, 0, &d, src).is_err());
        assert!(generate(&set, &[awgn()], &[0.0], 0, 0, &d, src).is_err());
    }

    #[test]
    fn high_snr_records_are_mostly_baseline_recoverable() {
        // At 8 dB AWGN the strongest candidate family member should win the
        // plain mean-evidence vote for the vast majority of frames.
        let set = set_for(Scheme::Ldpc);
        let ds = generate(
            &set,
            &[awgn()],
            &[8.0],
            40,
            123,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        let lengths = set.codeword_lens();
        let mut hits = 0usize;
        for i in 0..ds.len() {
            let tensor = ds.feature_tensor(i);
            if crate::features::baseline_from_tensor(&tensor, &lengths).unwrap()
                == ds.labels[i] as usize
            {
                hits += 1;
            }
        }
        let accuracy = hits as f64 / ds.len() as f64;
        assert!(accuracy >= 0.9, "baseline accuracy {accuracy} below 0.9");
    }

    #[test]
    fn split_is_stratified_disjoint_and_exhaustive() {
        let set = set_for(Scheme::Conv);
        let ds = generate(
            &set,
            &[awgn()],
            &[-2.0, 2.0],
            10,
            5,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        let spec = SplitSpec::default();
        let (train, val, test) = split(&ds, &spec).unwrap();
        assert_eq!(train.len(), 2 * 7 * 6);
        assert_eq!(val.len(), 2 * 7 * 2);
        assert_eq!(test.len(), 2 * 7 * 2);
        // Disjoint and exhaustive.
        let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        // Stratified: each (snr, class) cell contributes exactly 6/2/2.
        for &snr in &[-2.0f32, 2.0] {
            for class in 0..7u16 {
                let in_cell = |i: &usize| ds.snrs_db[*i] == snr && ds.labels[*i] == class;
                assert_eq!(train.iter().filter(|i| in_cell(i)).count(), 6);
                assert_eq!(val.iter().filter(|i| in_cell(i)).count(), 2);
                assert_eq!(test.iter().filter(|i| in_cell(i)).count(), 2);
            }
        }
        // Deterministic.
        let again = split(&ds, &spec).unwrap();
        assert_eq!((train, val, test), again);
        // A different seed moves records between parts.
        let moved = split(&ds, &SplitSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(moved.0, again.0);
    }

    #[test]
    fn split_rejects_cells_too_small_for_the_fractions() {
        let set = set_for(Scheme::Conv);
        let ds = generate(
            &set,
            &[awgn()],
            &[0.0],
            3,
            5,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        let err = split(&ds, &SplitSpec::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cell") && msg.contains("class"), "{msg}");
        // Bad fractions.
        let bad = SplitSpec { train: 0.5, validation: 0.2, test: 0.2, seed: 0 };
        assert!(split(&ds, &bad).is_err());
        let bad = SplitSpec { train: -0.6, validation: 0.8, test: 0.8, seed: 0 };
        assert!(split(&ds, &bad).is_err());
    }

    #[test]
    fn files_round_trip_bit_exactly() {
        let set = set_for(Scheme::Conv);
        let ds = generate(
            &set,
            &[awgn()],
            &[-2.0, 6.0],
            4,
            11,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.crds");
        save(&ds, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(ds, loaded);
        loaded.check_digest(&set).unwrap();
        // A different set's digest is rejected.
        assert!(loaded.check_digest(&set_for(Scheme::Ldpc)).is_err());
        // Saving the loaded copy reproduces the file byte for byte.
        let path2 = dir.path().join("frames2.crds");
        save(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn empty_datasets_round_trip_as_header_only_files() {
        let set = set_for(Scheme::Conv);
        let ds = Dataset::empty(&set);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.crds");
        save(&ds, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 4 + 4 + 32 + 4 + 4 + 8);
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.len(), 0);
        assert_eq!(loaded, ds);
    }

    #[test]
    fn corruption_is_detected_with_record_and_offset() {
        let set = set_for(Scheme::Conv);
        let ds = generate(
            &set,
            &[awgn()],
            &[0.0],
            2,
            3,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.crds");
        save(&ds, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        // Flip one payload byte inside record 1.
        let header = 56usize;
        let record_len = 15 + ds.tensor_len() * 4 + 4;
        let mut bad = good.clone();
        let target = header + record_len + 20;
        bad[target] ^= 0xFF;
        std::fs::write(&path, &bad).unwrap();
        let err = load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("record 1") && msg.contains("checksum"), "{msg}");

        // Truncation reports the byte offset.
        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        let msg = load(&path).unwrap_err().to_string();
        assert!(msg.contains("truncated"), "{msg}");

        // Magic and version.
        let mut bad = good.clone();
        bad[0] = b'Y';
        std::fs::write(&path, &bad).unwrap();
        assert!(load(&path).unwrap_err().to_string().contains("magic"));
        let mut bad = good.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(load(&path).unwrap_err().to_string().contains("version"));

        // Trailing bytes.
        let mut bad = good.clone();
        bad.push(1);
        std::fs::write(&path, &bad).unwrap();
        assert!(load(&path).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn llr_archives_round_trip_and_are_checksummed() {
        let set = set_for(Scheme::Conv);
        let (ds, archive) = generate_with_llrs(
            &set,
            &[awgn()],
            &[0.0],
            2,
            3,
            &quick_decoder(),
            EvidenceSource::ReencodeAgreement,
        )
        .unwrap();
        assert_eq!(archive.records.len(), ds.len());
        // Frame lengths follow each record's true candidate.
        for (r, label) in archive.records.iter().zip(&ds.labels) {
            assert_eq!(r.llrs.len(), set.candidates[*label as usize].codeword_len);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.crll");
        save_llrs(&archive, &path).unwrap();
        let loaded = load_llrs(&path).unwrap();
        assert_eq!(archive, loaded);
        // One flipped byte is caught.
        let mut bad = std::fs::read(&path).unwrap();
        let len = bad.len();
        bad[len - 10] ^= 0x01;
        std::fs::write(&path, &bad).unwrap();
        assert!(load_llrs(&path).unwrap_err().to_string().contains("checksum"));
    }

    #[test]
    fn default_snr_grids_cover_each_operating_range() {
        assert_eq!(default_snr_grid(Scheme::Ldpc), vec![-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(default_snr_grid(Scheme::Conv), default_snr_grid(Scheme::Ldpc));
        assert_eq!(
            default_snr_grid(Scheme::Turbo),
            vec![-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0]
        );
        assert_eq!(
            default_snr_grid(Scheme::Polar),
            vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]
        );
    }
}
