use crate::scalar::Scalar;

/// One 8-connected component of cells at or above a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Lobe {
    /// `(row, col)` of every member cell.
    pub cells: Vec<(usize, usize)>,
    pub peak: (usize, usize),
    pub peak_value: f64,
}

/// Connected superthreshold components of a row-major grid, strongest first.
pub fn superthreshold_lobes<T: Scalar>(values: &[T], (rows, cols): (usize, usize), threshold: T) -> Vec<Lobe> {
    assert_eq!(values.len(), rows * cols, "grid shape does not match values");
    let mut seen = vec![false; values.len()];
    let mut lobes = Vec::new();
    for start in 0..values.len() {
        if seen[start] || !(values[start] >= threshold) {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut lobe = Lobe {
            cells: Vec::new(),
            peak: (start / cols, start % cols),
            peak_value: values[start].as_f64(),
        };
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            lobe.cells.push((r, c));
            if values[i].as_f64() > lobe.peak_value {
                lobe.peak = (r, c);
                lobe.peak_value = values[i].as_f64();
            }
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if !seen[j] && values[j] >= threshold {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        lobe.cells.sort_unstable();
        lobes.push(lobe);
    }
    lobes.sort_by(|a, b| b.peak_value.total_cmp(&a.peak_value));
    lobes
}
