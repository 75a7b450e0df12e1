use super::Image;
use crate::error::{invalid, Result};
use crate::indicators::{pseudo_sign, SignVote};
use crate::zonation::{FineParam, Mesh, Zonation};

fn grid_of(mesh: &Mesh) -> Result<(usize, usize)> {
    mesh.grid_dims().ok_or_else(|| invalid("rendering needs a grid mesh"))
}

/// False color of zone `j`: the low three bytes of the splitmix64 finalizer
/// applied to `j`.
pub fn zone_color(j: usize) -> [u8; 3] {
    let mut x = (j as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    [x as u8, (x >> 8) as u8, (x >> 16) as u8]
}

pub fn render_zonation(z: &Zonation, mesh: &Mesh) -> Result<Image> {
    let (nx, ny) = grid_of(mesh)?;
    if z.n_cells() != mesh.n_cells() {
        return Err(invalid("zonation does not match the mesh"));
    }
    let samples = z.assignment().iter().flat_map(|&j| zone_color(j)).collect();
    Image::new(nx, ny, 3, samples)
}

/// White where the pseudo-sign is positive, black where negative, gray
/// elsewhere.
pub fn render_pseudo_sign(g: &FineParam, mesh: &Mesh, vote: SignVote) -> Result<Image> {
    let (nx, ny) = grid_of(mesh)?;
    if g.n_cells() != mesh.n_cells() {
        return Err(invalid("gradient does not match the mesh"));
    }
    let samples = g
        .rows()
        .flat_map(|row| {
            let level = match pseudo_sign(row, vote) {
                1 => 255,
                -1 => 0,
                _ => 128,
            };
            [level; 3]
        })
        .collect();
    Image::new(nx, ny, 3, samples)
}

/// A 1- or 3-component parameter in true colors.
pub fn render_param(p: &FineParam, mesh: &Mesh) -> Result<Image> {
    let (nx, ny) = grid_of(mesh)?;
    Image::from_fine_param(nx, ny, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn first_hundred_colors_are_distinct() {
        let colors: HashSet<[u8; 3]> = (0..100).map(zone_color).collect();
        assert_eq!(colors.len(), 100);
        assert_eq!(zone_color(3), zone_color(3));
    }

    #[test]
    fn zonation_images() {
        let mesh = Mesh::grid(2, 2).unwrap();
        let img = render_zonation(&Zonation::single(4), &mesh).unwrap();
        assert!((0..4).all(|c| img.pixel(c / 2, c % 2) == zone_color(0)));

        let z = Zonation::new(vec![0, 0, 1, 1], 2).unwrap();
        let img = render_zonation(&z, &mesh).unwrap();
        assert_eq!(img.pixel(0, 0), img.pixel(0, 1));
        assert_eq!(img.pixel(1, 0), zone_color(1));
        assert_ne!(img.pixel(0, 0), img.pixel(1, 0));
        assert_eq!(render_zonation(&z, &mesh).unwrap(), img);

        assert!(render_zonation(&z, &Mesh::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn pseudo_sign_images() {
        let mesh = Mesh::grid(4, 1).unwrap();
        let img = render_pseudo_sign(&FineParam::zeros(4, 1), &mesh, SignVote::Majority).unwrap();
        assert!(img.samples().iter().all(|&s| s == 128));

        let g = FineParam::new(1, vec![5.0, 5.0, -5.0, -5.0]).unwrap();
        let img = render_pseudo_sign(&g, &mesh, SignVote::Majority).unwrap();
        assert_eq!(img.samples(), &[255, 255, 255, 255, 255, 255, 0, 0, 0, 0, 0, 0]);

        let mesh = Mesh::grid(1, 1).unwrap();
        let g = FineParam::new(3, vec![1.0, -1.0, 0.0]).unwrap();
        let img = render_pseudo_sign(&g, &mesh, SignVote::Majority).unwrap();
        assert_eq!(img.pixel(0, 0), &[128, 128, 128]);
    }

    #[test]
    fn param_rendering_rounds() {
        let mesh = Mesh::grid(2, 1).unwrap();
        let p = FineParam::new(3, vec![127.5, 0.4, 300.0, 1.0, 2.0, 3.0]).unwrap();
        let img = render_param(&p, &mesh).unwrap();
        assert_eq!(img.samples(), &[128, 0, 255, 1, 2, 3]);
        assert!(render_param(&FineParam::zeros(2, 2), &mesh).is_err());
    }
}
