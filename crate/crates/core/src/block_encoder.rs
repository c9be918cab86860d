//! Two-phase sparsification encoder over shuffled tiles.
//!
//! Phase one flags every all-zero 16-byte block (4 words) of each tile into
//! a packed bit-flag array. Phase two places the surviving blocks at offsets
//! computed by an exclusive prefix sum, so workers write disjoint ranges and
//! the output bytes are independent of scheduling. The decoder scatters
//! payload blocks back by the same flags and zero-fills the rest.

use crate::bitshuffle::{self, TILE_WORDS};
use crate::error::{CorruptError, Error, Result};
use crate::parallel;

/// Words per block: 16 bytes.
pub const BLOCK_WORDS: usize = 4;
pub const BLOCK_BYTES: usize = 16;
/// Blocks per tile (256 blocks cover 1024 words exactly).
pub const BLOCKS_PER_TILE: usize = TILE_WORDS / BLOCK_WORDS;
/// Packed flag words per tile.
pub const FLAG_WORDS_PER_TILE: usize = BLOCKS_PER_TILE / 32;
/// Serialized flag bytes per tile.
pub const FLAG_BYTES_PER_TILE: usize = 4 * FLAG_WORDS_PER_TILE;

/// Per-tile block flags. Flag of block `32w + k` sits at bit `k` of word
/// `w` (LSB first). The transient byte flags never leave [`flag_tile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileFlags {
    pub bit_flags: [u32; FLAG_WORDS_PER_TILE],
    pub nonzero_count: u32,
}

impl TileFlags {
    pub fn from_bits(bit_flags: [u32; FLAG_WORDS_PER_TILE]) -> Self {
        let nonzero_count = bit_flags.iter().map(|w| w.count_ones()).sum();
        TileFlags {
            bit_flags,
            nonzero_count,
        }
    }

    pub fn block_is_set(&self, block: usize) -> bool {
        self.bit_flags[block / 32] >> (block % 32) & 1 == 1
    }

    /// Encoded size of this tile: the flag words plus its surviving blocks.
    pub fn encoded_bytes(&self) -> usize {
        FLAG_BYTES_PER_TILE + self.nonzero_count as usize * BLOCK_BYTES
    }
}

pub(crate) fn flag_tile_unchecked(tile: &[u32]) -> TileFlags {
    let mut byte_flags = [0u8; BLOCKS_PER_TILE];
    for (b, flag) in byte_flags.iter_mut().enumerate() {
        let words = &tile[b * BLOCK_WORDS..(b + 1) * BLOCK_WORDS];
        *flag = u8::from(words.iter().any(|&w| w != 0));
    }
    let mut bit_flags = [0u32; FLAG_WORDS_PER_TILE];
    for (w, chunk) in byte_flags.chunks_exact(32).enumerate() {
        let mut packed = 0u32;
        for (k, &f) in chunk.iter().enumerate() {
            packed |= (f as u32) << k;
        }
        bit_flags[w] = packed;
    }
    TileFlags::from_bits(bit_flags)
}

/// Flags the all-zero blocks of one shuffled tile.
pub fn flag_tile(tile: &[u32]) -> Result<TileFlags> {
    if tile.len() != TILE_WORDS {
        return Err(Error::TileSize(tile.len()));
    }
    Ok(flag_tile_unchecked(tile))
}

/// Exclusive prefix sum: `out[0] = 0`, `out[i] = out[i-1] + sizes[i-1]`,
/// plus the grand total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetTable {
    pub offsets: Vec<u64>,
    pub total: u64,
}

pub fn exclusive_prefix_sum(sizes: &[u64]) -> OffsetTable {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0u64;
    for &s in sizes {
        offsets.push(acc);
        acc += s;
    }
    OffsetTable {
        offsets,
        total: acc,
    }
}

/// Shuffles and flags a code stream in one pass per tile, while the tile is
/// still cache-resident.
pub fn shuffle_and_flag_stream(
    codes: &[u16],
    workers: usize,
) -> (bitshuffle::ShuffledStream, Vec<TileFlags>) {
    let tile_count = codes.len().div_ceil(bitshuffle::TILE_CODES);
    let mut words = vec![0u32; tile_count * TILE_WORDS];
    let mut flags = vec![TileFlags::from_bits([0; FLAG_WORDS_PER_TILE]); tile_count];
    let ranges = parallel::chunk_ranges(tile_count, workers);
    std::thread::scope(|scope| {
        let mut words_rest = words.as_mut_slice();
        let mut flags_rest = flags.as_mut_slice();
        for r in ranges {
            let (wchunk, wtail) = words_rest.split_at_mut(r.len() * TILE_WORDS);
            words_rest = wtail;
            let (fchunk, ftail) = flags_rest.split_at_mut(r.len());
            flags_rest = ftail;
            scope.spawn(move || {
                let mut buf = [0u32; TILE_WORDS];
                for ((slot, flag), tile) in
                    wchunk.chunks_exact_mut(TILE_WORDS).zip(fchunk).zip(r)
                {
                    bitshuffle::pack_tile_words(codes, tile, &mut buf);
                    bitshuffle::shuffle_tile_into(&buf, slot);
                    *flag = flag_tile_unchecked(slot);
                }
            });
        }
    });
    (
        bitshuffle::ShuffledStream {
            words,
            tile_count,
            code_count: codes.len(),
        },
        flags,
    )
}

/// Emits every flagged block, in tile order then block order, as little
/// endian words.
pub fn compact_tiles(tiles: &[u32], flags: &[TileFlags], workers: usize) -> Vec<u8> {
    debug_assert_eq!(tiles.len(), flags.len() * TILE_WORDS);
    let sizes: Vec<u64> = flags
        .iter()
        .map(|f| f.nonzero_count as u64 * BLOCK_BYTES as u64)
        .collect();
    let table = exclusive_prefix_sum(&sizes);
    let mut payload = vec![0u8; table.total as usize];
    let ranges = parallel::chunk_ranges(flags.len(), workers);
    std::thread::scope(|scope| {
        let mut rest = payload.as_mut_slice();
        let mut consumed = 0u64;
        for r in ranges {
            let end = if r.end == flags.len() {
                table.total
            } else {
                table.offsets[r.end]
            };
            let (chunk, tail) = rest.split_at_mut((end - consumed) as usize);
            rest = tail;
            consumed = end;
            let (table, flags) = (&table, &flags);
            scope.spawn(move || {
                let mut at = 0usize;
                for tile in r.clone() {
                    debug_assert_eq!(table.offsets[tile] - table.offsets[r.start], at as u64);
                    let words = &tiles[tile * TILE_WORDS..(tile + 1) * TILE_WORDS];
                    for block in 0..BLOCKS_PER_TILE {
                        if !flags[tile].block_is_set(block) {
                            continue;
                        }
                        for w in 0..BLOCK_WORDS {
                            let bytes = words[block * BLOCK_WORDS + w].to_le_bytes();
                            chunk[at..at + 4].copy_from_slice(&bytes);
                            at += 4;
                        }
                    }
                }
            });
        }
    });
    payload
}

/// Inverse of [`compact_tiles`]: rebuilds the shuffled tiles from flags and
/// payload, zero-filling cleared blocks. Fails if the payload length does
/// not match the flags.
pub fn scatter_tiles(flags: &[TileFlags], payload: &[u8], workers: usize) -> Result<Vec<u32>> {
    let sizes: Vec<u64> = flags
        .iter()
        .map(|f| f.nonzero_count as u64 * BLOCK_BYTES as u64)
        .collect();
    let table = exclusive_prefix_sum(&sizes);
    if payload.len() as u64 != table.total {
        return Err(Error::Corrupt(CorruptError::PayloadMismatch {
            expected: table.total,
            actual: payload.len() as u64,
        }));
    }
    let mut tiles = vec![0u32; flags.len() * TILE_WORDS];
    let ranges = parallel::chunk_ranges(flags.len(), workers);
    std::thread::scope(|scope| {
        let mut rest = tiles.as_mut_slice();
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len() * TILE_WORDS);
            rest = tail;
            let (table, flags) = (&table, &flags);
            scope.spawn(move || {
                for (words, tile) in chunk.chunks_exact_mut(TILE_WORDS).zip(r) {
                    let mut at = table.offsets[tile] as usize;
                    for block in 0..BLOCKS_PER_TILE {
                        if !flags[tile].block_is_set(block) {
                            continue;
                        }
                        for w in 0..BLOCK_WORDS {
                            let mut le = [0u8; 4];
                            le.copy_from_slice(&payload[at..at + 4]);
                            words[block * BLOCK_WORDS + w] = u32::from_le_bytes(le);
                            at += 4;
                        }
                    }
                }
            });
        }
    });
    Ok(tiles)
}
