//! MovieLens-1M `.dat` files (`::`-delimited, latin-1) and the tag-genome CSV.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use mvmf_core::nalgebra::DMatrix;

use crate::error::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingRecord {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: u32,
    /// `'F'` or `'M'`.
    pub gender: char,
    pub age: u32,
    pub occupation: u32,
    pub zipcode: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title: String,
    pub genres: Vec<String>,
}

/// Tag relevance scores, one row per movie in `movie_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagGenome {
    pub movie_ids: Vec<u32>,
    pub tag_ids: Vec<u32>,
    pub relevance: DMatrix<f64>,
}

impl TagGenome {
    /// Rows in the order of `movie_ids`; movies without genome data get zero rows.
    /// Returns the matrix and a per-row presence mask.
    pub fn aligned(&self, movie_ids: &[u32]) -> (DMatrix<f64>, Vec<bool>) {
        let index: HashMap<u32, usize> = self.movie_ids.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        let mut out = DMatrix::zeros(movie_ids.len(), self.tag_ids.len());
        let mut present = vec![false; movie_ids.len()];
        for (row, id) in movie_ids.iter().enumerate() {
            if let Some(&r) = index.get(id) {
                out.row_mut(row).copy_from(&self.relevance.row(r));
                present[row] = true;
            }
        }
        (out, present)
    }
}

/// Parsed files with ratings deduplicated (last occurrence wins).
#[derive(Debug, Clone, PartialEq)]
pub struct RawMovieLens {
    pub ratings: Vec<RatingRecord>,
    pub users: Vec<UserRecord>,
    pub movies: Vec<MovieRecord>,
    pub genome: Option<TagGenome>,
}

/// File locations; `in_dir` uses the distribution's file names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovieLensPaths {
    pub ratings: PathBuf,
    pub users: PathBuf,
    pub movies: PathBuf,
    pub genome: Option<PathBuf>,
}

impl MovieLensPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let genome = dir.join("genome-scores.csv");
        Self {
            ratings: dir.join("ratings.dat"),
            users: dir.join("users.dat"),
            movies: dir.join("movies.dat"),
            genome: genome.exists().then_some(genome),
        }
    }
}

/// Latin-1 maps each byte to the code point of the same value.
fn read_latin1(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

fn fields<'a>(line: &'a str, expected: usize, path: &Path, no: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split("::").collect();
    if parts.len() != expected {
        return Err(DataError::parse(path, no, format!("expected {expected} '::'-separated fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn num<T: std::str::FromStr>(s: &str, what: &str, path: &Path, no: usize) -> Result<T> {
    s.trim().parse().map_err(|_| DataError::parse(path, no, format!("bad {what} {s:?}")))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

/// `UserID::MovieID::Rating::Timestamp`. Duplicate pairs keep the last record.
pub fn parse_ratings(text: &str, path: &Path) -> Result<Vec<RatingRecord>> {
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut out: Vec<RatingRecord> = Vec::new();
    for (no, line) in lines(text) {
        let f = fields(line, 4, path, no)?;
        let rec = RatingRecord {
            user_id: num(f[0], "user id", path, no)?,
            movie_id: num(f[1], "movie id", path, no)?,
            rating: num(f[2], "rating", path, no)?,
            timestamp: num(f[3], "timestamp", path, no)?,
        };
        if !(1..=5).contains(&rec.rating) {
            return Err(DataError::parse(path, no, format!("rating {} outside 1..5", rec.rating)));
        }
        match seen.get(&(rec.user_id, rec.movie_id)) {
            Some(&k) => {
                warn!("{}:{no}: duplicate rating for user {} movie {}, keeping last", path.display(), rec.user_id, rec.movie_id);
                out[k] = rec;
            }
            None => {
                seen.insert((rec.user_id, rec.movie_id), out.len());
                out.push(rec);
            }
        }
    }
    Ok(out)
}

/// `UserID::Gender::Age::Occupation::Zip-code`.
pub fn parse_users(text: &str, path: &Path) -> Result<Vec<UserRecord>> {
    lines(text)
        .map(|(no, line)| {
            let f = fields(line, 5, path, no)?;
            let gender = match f[1].trim() {
                "F" => 'F',
                "M" => 'M',
                other => return Err(DataError::parse(path, no, format!("bad gender {other:?}"))),
            };
            Ok(UserRecord {
                user_id: num(f[0], "user id", path, no)?,
                gender,
                age: num(f[2], "age", path, no)?,
                occupation: num(f[3], "occupation", path, no)?,
                zipcode: f[4].trim().to_string(),
            })
        })
        .collect()
}

/// `MovieID::Title::Genre|Genre|...`.
pub fn parse_movies(text: &str, path: &Path) -> Result<Vec<MovieRecord>> {
    lines(text)
        .map(|(no, line)| {
            let f = fields(line, 3, path, no)?;
            Ok(MovieRecord {
                movie_id: num(f[0], "movie id", path, no)?,
                title: f[1].to_string(),
                genres: f[2].split('|').filter(|g| !g.is_empty()).map(str::to_string).collect(),
            })
        })
        .collect()
}

/// Long-format `movieId,tagId,relevance` with a header line. Missing cells are zero.
pub fn parse_genome(text: &str, path: &Path) -> Result<TagGenome> {
    let mut entries: Vec<(u32, u32, f64)> = Vec::new();
    for (no, line) in lines(text) {
        if no == 1 && line.trim_start().starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(DataError::parse(path, no, format!("expected 3 comma-separated fields, found {}", f.len())));
        }
        let rel: f64 = num(f[2], "relevance", path, no)?;
        if !rel.is_finite() {
            return Err(DataError::parse(path, no, "non-finite relevance"));
        }
        entries.push((num(f[0], "movie id", path, no)?, num(f[1], "tag id", path, no)?, rel));
    }
    let movies: BTreeMap<u32, usize> = entries.iter().map(|e| (e.0, 0)).collect();
    let tags: BTreeMap<u32, usize> = entries.iter().map(|e| (e.1, 0)).collect();
    let movie_ids: Vec<u32> = movies.keys().copied().collect();
    let tag_ids: Vec<u32> = tags.keys().copied().collect();
    let mi: HashMap<u32, usize> = movie_ids.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let ti: HashMap<u32, usize> = tag_ids.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut relevance = DMatrix::zeros(movie_ids.len(), tag_ids.len());
    for (m, t, r) in entries {
        relevance[(mi[&m], ti[&t])] = r;
    }
    Ok(TagGenome { movie_ids, tag_ids, relevance })
}

/// Reads and validates all files. A user id in the ratings without a user record is an error.
pub fn ingest_movielens(paths: &MovieLensPaths) -> Result<RawMovieLens> {
    let ratings = parse_ratings(&read_latin1(&paths.ratings)?, &paths.ratings)?;
    let users = parse_users(&read_latin1(&paths.users)?, &paths.users)?;
    let movies = parse_movies(&read_latin1(&paths.movies)?, &paths.movies)?;
    let genome = match &paths.genome {
        Some(p) => Some(parse_genome(&read_latin1(p)?, p)?),
        None => None,
    };
    let known: std::collections::HashSet<u32> = users.iter().map(|u| u.user_id).collect();
    if let Some(r) = ratings.iter().find(|r| !known.contains(&r.user_id)) {
        return Err(DataError::Invalid(format!("rating references unknown user {}", r.user_id)));
    }
    Ok(RawMovieLens { ratings, users, movies, genome })
}

/// Writes the three `.dat` files (and the genome CSV when present) to `dir`.
pub fn write_movielens_dir(raw: &RawMovieLens, dir: &Path) -> Result<MovieLensPaths> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let paths = MovieLensPaths {
        ratings: dir.join("ratings.dat"),
        users: dir.join("users.dat"),
        movies: dir.join("movies.dat"),
        genome: raw.genome.as_ref().map(|_| dir.join("genome-scores.csv")),
    };
    let write = |path: &Path, text: String| fs::write(path, text).map_err(|e| DataError::io(path, e));
    write(
        &paths.ratings,
        raw.ratings.iter().map(|r| format!("{}::{}::{}::{}\n", r.user_id, r.movie_id, r.rating, r.timestamp)).collect(),
    )?;
    write(
        &paths.users,
        raw.users
            .iter()
            .map(|u| format!("{}::{}::{}::{}::{}\n", u.user_id, u.gender, u.age, u.occupation, u.zipcode))
            .collect(),
    )?;
    write(
        &paths.movies,
        raw.movies.iter().map(|m| format!("{}::{}::{}\n", m.movie_id, m.title, m.genres.join("|"))).collect(),
    )?;
    if let (Some(g), Some(p)) = (&raw.genome, &paths.genome) {
        let mut text = String::from("movieId,tagId,relevance\n");
        for (r, m) in g.movie_ids.iter().enumerate() {
            for (c, t) in g.tag_ids.iter().enumerate() {
                text.push_str(&format!("{m},{t},{}\n", g.relevance[(r, c)]));
            }
        }
        write(p, text)?;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ratings_file() {
        assert!(parse_ratings("", Path::new("r.dat")).unwrap().is_empty());
    }

    #[test]
    fn three_line_fixture() {
        let text = "1::1193::5::978300760\n1::661::3::978302109\n2::1357::4::978298709\n";
        let r = parse_ratings(text, Path::new("r.dat")).unwrap();
        let triples: Vec<(u32, u32, u8)> = r.iter().map(|r| (r.user_id, r.movie_id, r.rating)).collect();
        assert_eq!(triples, vec![(1, 1193, 5), (1, 661, 3), (2, 1357, 4)]);
    }

    #[test]
    fn duplicate_keeps_last() {
        let r = parse_ratings("1::5::2::10\n1::5::4::20\n", Path::new("r.dat")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rating, 4);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_ratings("1::5::2::10\n1::x::4::20\n", Path::new("r.dat")).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
        let err = parse_ratings("1::5::7::10\n", Path::new("r.dat")).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn users_and_movies() {
        let u = parse_users("1::F::1::10::48067\n2::M::56::16::70072\n", Path::new("u.dat")).unwrap();
        assert_eq!(u[1], UserRecord { user_id: 2, gender: 'M', age: 56, occupation: 16, zipcode: "70072".into() });
        let m = parse_movies("1::Toy Story (1995)::Animation|Children's|Comedy\n", Path::new("m.dat")).unwrap();
        assert_eq!(m[0].genres.len(), 3);
    }

    #[test]
    fn genome_long_format() {
        let g = parse_genome("movieId,tagId,relevance\n2,1,0.5\n1,2,0.25\n1,1,0.75\n", Path::new("g.csv")).unwrap();
        assert_eq!(g.movie_ids, vec![1, 2]);
        assert_eq!(g.relevance, DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.5, 0.0]));
        let (aligned, present) = g.aligned(&[2, 9]);
        assert_eq!(aligned.row(0)[0], 0.5);
        assert_eq!(present, vec![true, false]);
    }
}
