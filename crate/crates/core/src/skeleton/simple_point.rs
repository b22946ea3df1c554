//! Simple-point tests for homotopic thinning.
//!
//! A foreground voxel is simple when deleting it changes neither the
//! 26-connectivity of the foreground nor the 6-connectivity of the
//! background. That holds exactly when (a) the foreground within the
//! punctured 26-neighborhood forms one 26-component, and (b) the background
//! within the 18-neighborhood forms one 6-component touching a face
//! neighbor, with 6-paths confined to the 18-neighborhood.

/// Neighborhood occupancy sampled around a voxel; `get(dx,dy,dz)` with
/// offsets in `{-1,0,1}` and out-of-volume treated as background.
pub(crate) struct Neighborhood {
    cells: [bool; 27],
}

impl Neighborhood {
    #[inline]
    fn idx(dx: i32, dy: i32, dz: i32) -> usize {
        ((dz + 1) * 9 + (dy + 1) * 3 + (dx + 1)) as usize
    }

    pub fn sample(
        fg: &[bool],
        dims: (usize, usize, usize),
        x: usize,
        y: usize,
        z: usize,
    ) -> Self {
        let (nx, ny, nz) = dims;
        let mut cells = [false; 27];
        for dz in -1i32..=1 {
            let cz = z as i32 + dz;
            if cz < 0 || cz >= nz as i32 {
                continue;
            }
            for dy in -1i32..=1 {
                let cy = y as i32 + dy;
                if cy < 0 || cy >= ny as i32 {
                    continue;
                }
                for dx in -1i32..=1 {
                    let cx = x as i32 + dx;
                    if cx < 0 || cx >= nx as i32 {
                        continue;
                    }
                    let i = (cz as usize * ny + cy as usize) * nx + cx as usize;
                    cells[Self::idx(dx, dy, dz)] = fg[i];
                }
            }
        }
        Neighborhood { cells }
    }

    #[inline]
    fn get(&self, dx: i32, dy: i32, dz: i32) -> bool {
        self.cells[Self::idx(dx, dy, dz)]
    }

    /// Number of foreground voxels among the 26 neighbors.
    pub fn fg_count(&self) -> usize {
        let mut n = 0;
        for (i, &c) in self.cells.iter().enumerate() {
            if i != 13 && c {
                n += 1;
            }
        }
        n
    }
}

const OFFSETS_26: [(i32, i32, i32); 26] = {
    let mut out = [(0, 0, 0); 26];
    let mut i = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[i] = (dx, dy, dz);
                    i += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

#[inline]
fn adjacent_26(a: (i32, i32, i32), b: (i32, i32, i32)) -> bool {
    let (dx, dy, dz) = ((a.0 - b.0).abs(), (a.1 - b.1).abs(), (a.2 - b.2).abs());
    dx <= 1 && dy <= 1 && dz <= 1 && (dx + dy + dz) > 0
}

#[inline]
fn adjacent_6(a: (i32, i32, i32), b: (i32, i32, i32)) -> bool {
    (a.0 - b.0).abs() + (a.1 - b.1).abs() + (a.2 - b.2).abs() == 1
}

/// `C*`: 26-components of foreground in the punctured neighborhood.
fn fg_component_count(n: &Neighborhood) -> usize {
    let members: Vec<(i32, i32, i32)> = OFFSETS_26
        .iter()
        .copied()
        .filter(|&(dx, dy, dz)| n.get(dx, dy, dz))
        .collect();
    count_components(&members, adjacent_26)
}

/// `C̄`: 6-components of background within the 18-neighborhood that contain
/// a face neighbor of the center.
fn bg_component_count(n: &Neighborhood) -> usize {
    let members: Vec<(i32, i32, i32)> = OFFSETS_26
        .iter()
        .copied()
        .filter(|&(dx, dy, dz)| dx.abs() + dy.abs() + dz.abs() <= 2 && !n.get(dx, dy, dz))
        .collect();
    let mut count = 0;
    let mut visited = vec![false; members.len()];
    for start in 0..members.len() {
        if visited[start] {
            continue;
        }
        // Flood this 6-component inside the 18-neighborhood.
        let mut stack = vec![start];
        visited[start] = true;
        let mut touches_face = false;
        while let Some(i) = stack.pop() {
            let m = members[i];
            if m.0.abs() + m.1.abs() + m.2.abs() == 1 {
                touches_face = true;
            }
            for (j, &other) in members.iter().enumerate() {
                if !visited[j] && adjacent_6(m, other) {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if touches_face {
            count += 1;
        }
    }
    count
}

fn count_components(
    members: &[(i32, i32, i32)],
    adjacent: fn((i32, i32, i32), (i32, i32, i32)) -> bool,
) -> usize {
    let mut visited = vec![false; members.len()];
    let mut count = 0;
    for start in 0..members.len() {
        if visited[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            for (j, &other) in members.iter().enumerate() {
                if !visited[j] && adjacent(members[i], other) {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// 3D simple-point test with (26, 6) connectivity for (foreground,
/// background).
pub fn is_simple_26_6(fg: &[bool], dims: (usize, usize, usize), x: usize, y: usize, z: usize) -> bool {
    let n = Neighborhood::sample(fg, dims, x, y, z);
    fg_component_count(&n) == 1 && bg_component_count(&n) == 1
}

/// 2D simple-point test with (8, 4) connectivity, for slice-wise thinning.
///
/// `fg` is one slice in row-major order (`y` rows, `x` fastest).
pub fn is_simple_2d_8_4(fg: &[bool], dims: (usize, usize), x: usize, y: usize) -> bool {
    let (nx, ny) = dims;
    let get = |dx: i32, dy: i32| -> bool {
        let cx = x as i32 + dx;
        let cy = y as i32 + dy;
        if cx < 0 || cy < 0 || cx >= nx as i32 || cy >= ny as i32 {
            return false;
        }
        fg[cy as usize * nx + cx as usize]
    };
    let offsets: [(i32, i32); 8] = [
        (-1, -1),
        (0, -1),
        (1, -1),
        (-1, 0),
        (1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    let fg_members: Vec<(i32, i32)> = offsets.iter().copied().filter(|&(dx, dy)| get(dx, dy)).collect();
    let bg_members: Vec<(i32, i32)> = offsets
        .iter()
        .copied()
        .filter(|&(dx, dy)| !get(dx, dy))
        .collect();

    // One 8-component of foreground.
    let mut visited = vec![false; fg_members.len()];
    let mut fg_components = 0;
    for s in 0..fg_members.len() {
        if visited[s] {
            continue;
        }
        fg_components += 1;
        let mut stack = vec![s];
        visited[s] = true;
        while let Some(i) = stack.pop() {
            for (j, &o) in fg_members.iter().enumerate() {
                let d = ((fg_members[i].0 - o.0).abs(), (fg_members[i].1 - o.1).abs());
                if !visited[j] && d.0 <= 1 && d.1 <= 1 && (d.0 + d.1) > 0 {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    if fg_components != 1 {
        return false;
    }

    // One 4-component of background touching a 4-neighbor of the center.
    let mut visited = vec![false; bg_members.len()];
    let mut bg_components = 0;
    for s in 0..bg_members.len() {
        if visited[s] {
            continue;
        }
        let mut stack = vec![s];
        visited[s] = true;
        let mut touches_face = false;
        while let Some(i) = stack.pop() {
            let m = bg_members[i];
            if m.0.abs() + m.1.abs() == 1 {
                touches_face = true;
            }
            for (j, &o) in bg_members.iter().enumerate() {
                if !visited[j] && (m.0 - o.0).abs() + (m.1 - o.1).abs() == 1 {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if touches_face {
            bg_components += 1;
        }
    }
    bg_components == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume_from(points: &[(usize, usize, usize)], dims: (usize, usize, usize)) -> Vec<bool> {
        let mut fg = vec![false; dims.0 * dims.1 * dims.2];
        for &(x, y, z) in points {
            fg[(z * dims.1 + y) * dims.0 + x] = true;
        }
        fg
    }

    #[test]
    fn isolated_voxel_is_not_simple() {
        let dims = (3, 3, 3);
        let fg = volume_from(&[(1, 1, 1)], dims);
        // Deleting it would remove a component.
        assert!(!is_simple_26_6(&fg, dims, 1, 1, 1));
    }

    #[test]
    fn line_end_is_simple_line_middle_is_not() {
        let dims = (5, 3, 3);
        let fg = volume_from(&[(1, 1, 1), (2, 1, 1), (3, 1, 1)], dims);
        assert!(is_simple_26_6(&fg, dims, 1, 1, 1));
        assert!(is_simple_26_6(&fg, dims, 3, 1, 1));
        assert!(!is_simple_26_6(&fg, dims, 2, 1, 1));
    }

    #[test]
    fn surface_of_solid_block_is_simple_interior_not() {
        let dims = (5, 5, 5);
        let mut points = Vec::new();
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    points.push((x, y, z));
                }
            }
        }
        let fg = volume_from(&points, dims);
        assert!(is_simple_26_6(&fg, dims, 1, 1, 1)); // corner of block
        assert!(!is_simple_26_6(&fg, dims, 2, 2, 2)); // center (cavity would form)
    }

    #[test]
    fn bridge_voxel_between_two_lines_is_not_simple() {
        // Two voxels that touch only through the center: deleting the center
        // splits the component.
        let dims = (5, 5, 5);
        let fg = volume_from(&[(0, 2, 2), (2, 2, 2), (4, 2, 2)], dims);
        assert!(!is_simple_26_6(&fg, dims, 2, 2, 2));
    }

    #[test]
    fn simple_2d_cases() {
        // 3x3 slice, a horizontal line through the middle.
        let dims = (3, 3);
        let mut fg = vec![false; 9];
        fg[3] = true;
        fg[4] = true;
        fg[5] = true;
        assert!(is_simple_2d_8_4(&fg, dims, 0, 1));
        assert!(!is_simple_2d_8_4(&fg, dims, 1, 1));

        // Isolated pixel is not simple.
        let mut lone = vec![false; 9];
        lone[4] = true;
        assert!(!is_simple_2d_8_4(&lone, dims, 1, 1));
    }
}
