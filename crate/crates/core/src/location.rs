// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Location sanitization by geo-indistinguishability.
//!
//! A mentioned place is looked up in a gazetteer, moved by planar Laplace
//! noise, and replaced by the gazetteer city closest to the noisy point, so
//! surrogates are always real places. The original → surrogate mapping is
//! memoized per document so that repeated mentions cannot be averaged.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rstar::primitives::GeomWithData;
use rstar::RTree;
use serde::Deserialize;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::ldp::planar_laplace;

pub const DEFAULT_GAZETTEER: &str = include_str!("../data/gazetteer.csv");

pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const KM_PER_DEGREE: f64 = 111.32;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct City {
    pub name: String,
    #[serde(deserialize_with = "empty_as_none")]
    pub zip: Option<String>,
    pub latitude: f64,
    pub longitude: f64,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CityId(pub usize);

/// Case- and accent-folded form used for name lookup; hyphens and
/// apostrophes count as spaces.
pub fn normalize_name(s: &str) -> String {
    let folded: String = s
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c == '-' || c == '\'' || c == '’' {
                ' '
            } else {
                c
            }
        })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn unit_vector(lat: f64, lon: f64) -> [f64; 3] {
    let (lat, lon) = (lat.to_radians(), lon.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Haversine distance in km.
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Moves a point `r` km along bearing `theta` (0 = north) with a local
/// equirectangular approximation.
pub fn offset_point(lat: f64, lon: f64, r_km: f64, theta: f64) -> (f64, f64) {
    let dlat = r_km * theta.cos() / KM_PER_DEGREE;
    let cos_lat = lat.to_radians().cos().max(1e-6);
    let dlon = r_km * theta.sin() / (KM_PER_DEGREE * cos_lat);
    let new_lat = (lat + dlat).clamp(-90.0, 90.0);
    let new_lon = (lon + dlon + 180.0).rem_euclid(360.0) - 180.0;
    (new_lat, new_lon)
}

/// The city list with name, zip and nearest-neighbour indexes.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    cities: Vec<City>,
    by_name: HashMap<String, CityId>,
    by_zip: HashMap<String, CityId>,
    tree: RTree<GeomWithData<[f64; 3], usize>>,
    max_name_tokens: usize,
}

impl Gazetteer {
    /// When several cities share a name or zip, the first one listed wins.
    pub fn new(cities: Vec<City>) -> Result<Self> {
        if cities.is_empty() {
            return Err(Error::Gazetteer("no cities".into()));
        }
        let mut by_name = HashMap::new();
        let mut by_zip = HashMap::new();
        let mut points = Vec::with_capacity(cities.len());
        let mut max_name_tokens = 1;
        for (i, c) in cities.iter().enumerate() {
            if !(c.latitude.abs() <= 90.0 && c.longitude.abs() <= 180.0) {
                return Err(Error::Gazetteer(format!(
                    "{}: coordinates ({}, {}) out of range",
                    c.name, c.latitude, c.longitude
                )));
            }
            let key = normalize_name(&c.name);
            max_name_tokens = max_name_tokens.max(key.split(' ').count());
            by_name.entry(key).or_insert(CityId(i));
            if let Some(zip) = &c.zip {
                by_zip.entry(zip.trim().to_string()).or_insert(CityId(i));
            }
            points.push(GeomWithData::new(unit_vector(c.latitude, c.longitude), i));
        }
        Ok(Gazetteer {
            cities,
            by_name,
            by_zip,
            tree: RTree::bulk_load(points),
            max_name_tokens,
        })
    }

    /// Reads CSV with a `name,zip,latitude,longitude` header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["name", "zip", "latitude", "longitude"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Gazetteer(format!("missing column {required:?}")));
            }
        }
        let cities = rdr.deserialize().collect::<Result<Vec<City>, _>>()?;
        Self::new(cities)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file)
    }

    pub fn city(&self, id: CityId) -> &City {
        &self.cities[id.0]
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn by_name(&self, name: &str) -> Option<CityId> {
        self.by_name.get(&normalize_name(name)).copied()
    }

    pub fn by_zip(&self, zip: &str) -> Option<CityId> {
        self.by_zip.get(zip.trim()).copied()
    }

    /// City closest to a point by great-circle distance; ties go to the
    /// city listed first.
    pub fn nearest(&self, lat: f64, lon: f64) -> CityId {
        let q = unit_vector(lat, lon);
        let mut iter = self.tree.nearest_neighbor_iter_with_distance_2(&q);
        let (first, best_d2) = iter.next().expect("gazetteer is non-empty");
        // chord length orders like arc length; re-rank near-ties on the arc
        let cutoff = best_d2 * (1.0 + 1e-9) + 1e-24;
        let mut best = (
            great_circle_km(
                lat,
                lon,
                self.cities[first.data].latitude,
                self.cities[first.data].longitude,
            ),
            first.data,
        );
        for (p, d2) in iter {
            if d2 > cutoff {
                break;
            }
            let c = &self.cities[p.data];
            let d = great_circle_km(lat, lon, c.latitude, c.longitude);
            if d < best.0 || (d == best.0 && p.data < best.1) {
                best = (d, p.data);
            }
        }
        CityId(best.1)
    }

    /// Gazetteer names occurring as whole words in `text`, as char ranges.
    /// Longer names win over names they contain.
    pub fn find_embedded(&self, text: &str) -> Vec<(usize, usize, CityId)> {
        // word tokens as char ranges; hyphens and apostrophes split words
        let chars: Vec<char> = text.chars().collect();
        let mut words = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_alphanumeric() {
                let start = i;
                while i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                }
                words.push((start, i));
            } else {
                i += 1;
            }
        }

        let mut found = Vec::new();
        let mut w = 0;
        while w < words.len() {
            let mut matched = None;
            for n in (1..=self.max_name_tokens.min(words.len() - w)).rev() {
                let (start, end) = (words[w].0, words[w + n - 1].1);
                let candidate: String = chars[start..end].iter().collect();
                if let Some(id) = self.by_name(&candidate) {
                    matched = Some((n, start, end, id));
                    break;
                }
            }
            match matched {
                Some((n, start, end, id)) => {
                    found.push((start, end, id));
                    w += n;
                }
                None => w += 1,
            }
        }
        found
    }
}

impl Default for Gazetteer {
    fn default() -> Self {
        Gazetteer::from_csv(DEFAULT_GAZETTEER.as_bytes()).expect("shipped gazetteer is valid")
    }
}

/// Looks a location up by name, then by zip code.
pub fn resolve(gaz: &Gazetteer, surface: &str) -> Result<CityId> {
    gaz.by_name(surface)
        .or_else(|| gaz.by_zip(surface))
        .ok_or_else(|| Error::UnresolvedLocation(surface.to_string()))
}

/// Per-document original → surrogate table.
#[derive(Debug, Clone, Default)]
pub struct LocationMemo {
    resolved: HashMap<CityId, CityId>,
    unresolved: HashMap<String, CityId>,
}

impl LocationMemo {
    pub fn get(&self, z: CityId) -> Option<CityId> {
        self.resolved.get(&z).copied()
    }

    pub fn len(&self) -> usize {
        self.resolved.len() + self.unresolved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = (CityId, CityId)> + '_ {
        self.resolved.iter().map(|(k, v)| (*k, *v))
    }
}

/// Surrogate city for `z`: the memoized one, or a fresh planar-Laplace draw
/// (`epsilon` per km) snapped to the nearest gazetteer city.
pub fn perturb<R: Rng + ?Sized>(
    gaz: &Gazetteer,
    z: CityId,
    epsilon: f64,
    memo: &mut LocationMemo,
    rng: &mut R,
) -> Result<CityId> {
    if let Some(y) = memo.get(z) {
        return Ok(y);
    }
    let (r, theta) = planar_laplace(epsilon, rng)?;
    let c = gaz.city(z);
    let (lat, lon) = offset_point(c.latitude, c.longitude, r, theta);
    let y = gaz.nearest(lat, lon);
    memo.resolved.insert(z, y);
    Ok(y)
}

/// Uniformly random surrogate for a location missing from the gazetteer,
/// memoized on its folded surface.
pub fn fallback_city<R: Rng + ?Sized>(
    gaz: &Gazetteer,
    surface: &str,
    memo: &mut LocationMemo,
    rng: &mut R,
) -> CityId {
    let key = normalize_name(surface);
    *memo.unresolved.entry(key).or_insert_with(|| {
        log::warn!("location {surface:?} not in gazetteer; using a random city");
        CityId(rng.gen_range(0..gaz.len()))
    })
}

/// How a LOC span refers to its place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationForm {
    Name(CityId),
    Zip(CityId),
    /// A street address; only the city is kept.
    Address(CityId),
    Unresolved,
}

impl LocationForm {
    pub fn city(&self) -> Option<CityId> {
        match *self {
            LocationForm::Name(c) | LocationForm::Zip(c) | LocationForm::Address(c) => Some(c),
            LocationForm::Unresolved => None,
        }
    }
}

fn is_zip(s: &str) -> bool {
    s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit())
}

pub fn analyze(gaz: &Gazetteer, surface: &str) -> LocationForm {
    let trimmed = surface.trim();
    if is_zip(trimmed) {
        return gaz
            .by_zip(trimmed)
            .map_or(LocationForm::Unresolved, LocationForm::Zip);
    }
    if let Some(c) = gaz.by_name(trimmed) {
        return LocationForm::Name(c);
    }
    for part in trimmed.rsplit(',') {
        if let Some(c) = gaz.by_name(part) {
            return LocationForm::Address(c);
        }
    }
    if let Some(c) = trimmed
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| is_zip(t))
        .find_map(|t| gaz.by_zip(t))
    {
        return LocationForm::Address(c);
    }
    match gaz.find_embedded(trimmed).last() {
        Some(&(_, _, c)) => LocationForm::Address(c),
        None => LocationForm::Unresolved,
    }
}

/// Text for a LOC span given its surrogate city: a zip for zip mentions
/// (the name when the city has none), the city name otherwise.
pub fn render_location(
    gaz: &Gazetteer,
    form: LocationForm,
    surface: &str,
    surrogate: CityId,
) -> String {
    let city = gaz.city(surrogate);
    let wants_zip = matches!(form, LocationForm::Zip(_))
        || (form == LocationForm::Unresolved && is_zip(surface.trim()));
    match (&city.zip, wants_zip) {
        (Some(zip), true) => zip.clone(),
        _ => city.name.clone(),
    }
}

/// Replacement text for one LOC span. Resolved places go through
/// [`perturb`]; the rest through [`fallback_city`].
pub fn substitute_location<R: Rng + ?Sized>(
    gaz: &Gazetteer,
    surface: &str,
    epsilon: f64,
    memo: &mut LocationMemo,
    rng: &mut R,
) -> Result<(String, CityId)> {
    let form = analyze(gaz, surface);
    let surrogate = match form.city() {
        Some(z) => perturb(gaz, z, epsilon, memo, rng)?,
        None => fallback_city(gaz, surface, memo, rng),
    };
    Ok((render_location(gaz, form, surface, surrogate), surrogate))
}
