use crate::scene::{GridLayout, MAX_FRAMES};

use super::FrameError;

/// Every `rows × cols` arrangement holding exactly `frame_count` frames,
/// ordered by rows ascending.
pub fn enumerate_grids(frame_count: u32) -> Result<Vec<GridLayout>, FrameError> {
    if !(1..=MAX_FRAMES).contains(&frame_count) {
        return Err(FrameError::FrameCount(frame_count));
    }
    Ok((1..=frame_count)
        .filter(|rows| frame_count % rows == 0)
        .map(|rows| GridLayout {
            rows,
            cols: frame_count / rows,
        })
        .collect())
}

/// All layouts for every frame count 1..=10.
pub fn all_grids() -> Vec<GridLayout> {
    (1..=MAX_FRAMES)
        .flat_map(|n| enumerate_grids(n).expect("in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_force(n: u32) -> HashSet<(u32, u32)> {
        let mut out = HashSet::new();
        for r in 1..=10 {
            for c in 1..=10 {
                if r * c == n {
                    out.insert((r, c));
                }
            }
        }
        out
    }

    #[test]
    fn single_frame() {
        assert_eq!(enumerate_grids(1).unwrap(), vec![GridLayout { rows: 1, cols: 1 }]);
    }

    #[test]
    fn six_frames() {
        let got: Vec<_> = enumerate_grids(6)
            .unwrap()
            .into_iter()
            .map(|g| (g.rows, g.cols))
            .collect();
        assert_eq!(got, vec![(1, 6), (2, 3), (3, 2), (6, 1)]);
    }

    #[test]
    fn matches_divisor_oracle() {
        let mut total = 0;
        for n in 1..=10 {
            let got: Vec<_> = enumerate_grids(n).unwrap();
            let set: HashSet<_> = got.iter().map(|g| (g.rows, g.cols)).collect();
            assert_eq!(set.len(), got.len(), "duplicates for {n}");
            assert_eq!(set, brute_force(n), "n = {n}");
            total += got.len();
        }
        assert_eq!(total, 27);
        assert_eq!(all_grids().len(), 27);
    }

    #[test]
    fn out_of_range() {
        assert!(enumerate_grids(0).is_err());
        assert!(enumerate_grids(11).is_err());
    }
}
