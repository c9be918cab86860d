//! Tile-wise bitshuffle: permutes each 4096-byte tile of packed codes into
//! bit-plane-major order so that same-significance bits land together. Small
//! delta codes then leave most bit planes entirely zero, which the block
//! encoder strips.
//!
//! A tile is a 32x32 word matrix `A[r][c]`, row-major, each word packing two
//! 16-bit codes (even code in bits 0..16, odd code in bits 16..32). The
//! shuffled tile `O` satisfies, for all `r`, `c`, `j` in `0..32`:
//!
//! ```text
//! bit j of O[r][c]  ==  bit r of A[c][j]
//! ```
//!
//! so output row `r` holds exactly bit-plane `r` of the tile's 1024 words.
//! The serialized layout is row-major over `O` (one fixed canonical order;
//! any self-consistent layout would decode, this one is pinned for
//! cross-implementation bit-exactness).

use crate::error::{Error, Result};
use crate::parallel;

/// Words per tile (32x32).
pub const TILE_WORDS: usize = 1024;
/// 16-bit codes per tile (two per word).
pub const TILE_CODES: usize = 2 * TILE_WORDS;
/// Serialized tile size.
pub const TILE_BYTES: usize = 4 * TILE_WORDS;

/// In-place transpose of a 32x32 bit matrix: afterwards bit `j` of `m[i]`
/// equals bit `i` of the original `m[j]`. Recursive block swaps.
pub fn transpose_bits_32(m: &mut [u32; 32]) {
    let mut j = 16;
    let mut mask: u32 = 0x0000_FFFF;
    while j != 0 {
        let mut k = 0;
        while k < 32 {
            let t = (m[k] >> j ^ m[k + j]) & mask;
            m[k] ^= t << j;
            m[k + j] ^= t;
            k = (k + j + 1) & !j;
        }
        j >>= 1;
        mask ^= mask << j;
    }
}

#[inline]
fn check_tile(tile: &[u32]) -> Result<()> {
    if tile.len() != TILE_WORDS {
        return Err(Error::TileSize(tile.len()));
    }
    Ok(())
}

pub(crate) fn shuffle_tile_into(input: &[u32], out: &mut [u32]) {
    debug_assert_eq!(input.len(), TILE_WORDS);
    debug_assert_eq!(out.len(), TILE_WORDS);
    let mut row = [0u32; 32];
    for c in 0..32 {
        row.copy_from_slice(&input[c * 32..c * 32 + 32]);
        transpose_bits_32(&mut row);
        for r in 0..32 {
            out[r * 32 + c] = row[r];
        }
    }
}

pub(crate) fn unshuffle_tile_into(input: &[u32], out: &mut [u32]) {
    debug_assert_eq!(input.len(), TILE_WORDS);
    debug_assert_eq!(out.len(), TILE_WORDS);
    let mut col = [0u32; 32];
    for x in 0..32 {
        for b in 0..32 {
            col[b] = input[b * 32 + x];
        }
        transpose_bits_32(&mut col);
        out[x * 32..x * 32 + 32].copy_from_slice(&col);
    }
}

/// Shuffles one tile into bit-plane-major order.
pub fn shuffle_tile(tile: &[u32]) -> Result<Vec<u32>> {
    check_tile(tile)?;
    let mut out = vec![0u32; TILE_WORDS];
    shuffle_tile_into(tile, &mut out);
    Ok(out)
}

/// Exact inverse of [`shuffle_tile`].
pub fn unshuffle_tile(tile: &[u32]) -> Result<Vec<u32>> {
    check_tile(tile)?;
    let mut out = vec![0u32; TILE_WORDS];
    unshuffle_tile_into(tile, &mut out);
    Ok(out)
}

/// Bit-by-bit reference implementation of the same index map. Test oracle
/// only; keep it independent of the transpose path.
pub fn naive_bit_gather(tile: &[u32]) -> Result<Vec<u32>> {
    check_tile(tile)?;
    let mut out = vec![0u32; TILE_WORDS];
    for r in 0..32 {
        for c in 0..32 {
            let mut word = 0u32;
            for j in 0..32 {
                let bit = (tile[c * 32 + j] >> r) & 1;
                word |= bit << j;
            }
            out[r * 32 + c] = word;
        }
    }
    Ok(out)
}

/// A packed, padded, tile-shuffled code stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffledStream {
    /// `tile_count * 1024` shuffled words.
    pub words: Vec<u32>,
    pub tile_count: usize,
    /// Number of real codes; the rest of the last tile is zero padding.
    pub code_count: usize,
}

pub(crate) fn tile_count_for_codes(code_count: usize) -> usize {
    code_count.div_ceil(TILE_CODES)
}

/// Packs two codes per word, zero-padding the tail tile.
pub(crate) fn pack_tile_words(codes: &[u16], tile: usize, out: &mut [u32; TILE_WORDS]) {
    let base = tile * TILE_CODES;
    let avail = codes.len().saturating_sub(base);
    if avail >= TILE_CODES {
        let src = &codes[base..base + TILE_CODES];
        for (w, pair) in out.iter_mut().zip(src.chunks_exact(2)) {
            *w = pair[0] as u32 | (pair[1] as u32) << 16;
        }
    } else {
        out.fill(0);
        let src = &codes[base..];
        for (i, &c) in src.iter().enumerate() {
            out[i / 2] |= (c as u32) << (16 * (i % 2));
        }
    }
}

/// Packs a code sequence two-per-word, pads to whole tiles, and shuffles
/// each tile independently.
pub fn shuffle_stream(codes: &[u16], workers: usize) -> ShuffledStream {
    let tile_count = tile_count_for_codes(codes.len());
    let mut words = vec![0u32; tile_count * TILE_WORDS];
    shuffle_tiles_into(codes, &mut words, workers);
    ShuffledStream {
        words,
        tile_count,
        code_count: codes.len(),
    }
}

pub(crate) fn shuffle_tiles_into(codes: &[u16], words: &mut [u32], workers: usize) {
    let tile_count = words.len() / TILE_WORDS;
    let ranges = parallel::chunk_ranges(tile_count, workers);
    std::thread::scope(|scope| {
        let mut rest = words;
        for r in ranges {
            let (chunk, tail) = rest.split_at_mut(r.len() * TILE_WORDS);
            rest = tail;
            scope.spawn(move || {
                let mut buf = [0u32; TILE_WORDS];
                for (slot, tile) in chunk.chunks_exact_mut(TILE_WORDS).zip(r) {
                    pack_tile_words(codes, tile, &mut buf);
                    shuffle_tile_into(&buf, slot);
                }
            });
        }
    });
}

/// Inverse of [`shuffle_stream`]: unshuffles each tile and unpacks the first
/// `code_count` codes.
pub fn unshuffle_stream(stream: &ShuffledStream, workers: usize) -> Result<Vec<u16>> {
    if stream.words.len() != stream.tile_count * TILE_WORDS {
        return Err(Error::TileSize(stream.words.len()));
    }
    let mut codes = vec![0u16; stream.code_count];
    let ranges = parallel::chunk_ranges(stream.tile_count, workers);
    std::thread::scope(|scope| {
        let mut rest = codes.as_mut_slice();
        let mut consumed = 0usize;
        for r in ranges {
            let span = (r.end * TILE_CODES).min(stream.code_count) - consumed;
            let (chunk, tail) = rest.split_at_mut(span);
            rest = tail;
            consumed += span;
            let words = &stream.words;
            scope.spawn(move || {
                let mut buf = [0u32; TILE_WORDS];
                for tile in r.clone() {
                    unshuffle_tile_into(&words[tile * TILE_WORDS..(tile + 1) * TILE_WORDS], &mut buf);
                    let base = tile * TILE_CODES;
                    let offset = base - r.start * TILE_CODES;
                    for (i, &w) in buf.iter().enumerate() {
                        for half in 0..2 {
                            let idx = offset + 2 * i + half;
                            if idx < chunk.len() {
                                chunk[idx] = (w >> (16 * half)) as u16;
                            }
                        }
                    }
                }
            });
        }
    });
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_tile(seed: u64) -> Vec<u32> {
        let mut state = seed;
        (0..TILE_WORDS)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 32) as u32
            })
            .collect()
    }

    #[test]
    fn zero_tile_stays_zero() {
        let z = vec![0u32; TILE_WORDS];
        assert_eq!(shuffle_tile(&z).unwrap(), z);
        assert_eq!(unshuffle_tile(&z).unwrap(), z);
        assert_eq!(naive_bit_gather(&z).unwrap(), z);
    }

    #[test]
    fn rejects_wrong_size() {
        assert!(matches!(shuffle_tile(&[0; 10]), Err(Error::TileSize(10))));
        assert!(matches!(unshuffle_tile(&[0; 2048]), Err(Error::TileSize(2048))));
    }

    #[test]
    fn single_bit_at_origin() {
        let mut t = vec![0u32; TILE_WORDS];
        t[0] = 1; // A[0][0] bit 0
        let o = shuffle_tile(&t).unwrap();
        assert_eq!(o[0], 1); // O[0][0] bit 0
        assert_eq!(o.iter().map(|w| w.count_ones()).sum::<u32>(), 1);
    }

    #[test]
    fn single_bit_index_map() {
        // A[5][7] bit 13 -> O[13][5] bit 7.
        let mut t = vec![0u32; TILE_WORDS];
        t[5 * 32 + 7] = 1 << 13;
        let o = shuffle_tile(&t).unwrap();
        assert_eq!(o[13 * 32 + 5], 1 << 7);
        assert_eq!(o.iter().map(|w| w.count_ones()).sum::<u32>(), 1);
        // And back.
        let a = unshuffle_tile(&o).unwrap();
        assert_eq!(a, t);
    }

    #[test]
    fn matches_oracle_on_all_ones() {
        let t = vec![u32::MAX; TILE_WORDS];
        assert_eq!(shuffle_tile(&t).unwrap(), naive_bit_gather(&t).unwrap());
        assert_eq!(shuffle_tile(&t).unwrap(), t);
    }

    #[test]
    fn matches_oracle_on_random_tiles() {
        for seed in 0..200 {
            let t = rng_tile(seed);
            let fast = shuffle_tile(&t).unwrap();
            let slow = naive_bit_gather(&t).unwrap();
            assert_eq!(fast, slow, "seed {seed}");
            assert_eq!(unshuffle_tile(&fast).unwrap(), t, "seed {seed}");
            let pop = |v: &[u32]| v.iter().map(|w| w.count_ones() as u64).sum::<u64>();
            assert_eq!(pop(&t), pop(&fast));
        }
    }

    #[test]
    fn bit_planes_of_small_codes_are_zero() {
        // Codes with magnitude < 2^4 and no negatives leave planes 4..16 and
        // 20..32 empty.
        let mut state = 99u64;
        let codes: Vec<u16> = (0..TILE_CODES)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 48) as u16 & 0xF
            })
            .collect();
        let mut words = [0u32; TILE_WORDS];
        pack_tile_words(&codes, 0, &mut words);
        let o = shuffle_tile(&words).unwrap();
        for r in 4..16 {
            assert!(o[r * 32..(r + 1) * 32].iter().all(|&w| w == 0), "plane {r}");
        }
        for r in 20..32 {
            assert!(o[r * 32..(r + 1) * 32].iter().all(|&w| w == 0), "plane {r}");
        }
    }

    #[test]
    fn stream_tiling_arithmetic() {
        assert_eq!(shuffle_stream(&[], 1).tile_count, 0);
        let s = shuffle_stream(&vec![1u16; TILE_CODES], 1);
        assert_eq!(s.tile_count, 1);
        let s = shuffle_stream(&vec![1u16; TILE_CODES + 1], 2);
        assert_eq!(s.tile_count, 2);
        assert_eq!(s.words.len(), 2 * TILE_WORDS);
        assert_eq!(s.code_count, TILE_CODES + 1);
    }

    #[test]
    fn stream_round_trip() {
        let mut state = 4242u64;
        let codes: Vec<u16> = (0..5000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 48) as u16
            })
            .collect();
        for workers in [1, 3, 8] {
            let s = shuffle_stream(&codes, workers);
            let back = unshuffle_stream(&s, workers).unwrap();
            assert_eq!(back, codes);
        }
    }

    #[test]
    fn tiles_are_independent() {
        // Shuffling a concatenation equals concatenating shuffled tiles.
        let a = rng_tile(7);
        let b = rng_tile(8);
        let mut codes = Vec::with_capacity(2 * TILE_CODES);
        for &w in a.iter().chain(&b) {
            codes.push(w as u16);
            codes.push((w >> 16) as u16);
        }
        let s = shuffle_stream(&codes, 1);
        let sa = shuffle_tile(&a).unwrap();
        let sb = shuffle_tile(&b).unwrap();
        assert_eq!(&s.words[..TILE_WORDS], sa.as_slice());
        assert_eq!(&s.words[TILE_WORDS..], sb.as_slice());
    }
}
