//! Dataset ingestion and splitting: CSV/TSV parsing behind a column
//! descriptor, explicit-to-implicit mapping, density filtering, k-fold
//! cross-validation, and the two-domain split used by the cross-domain
//! experiments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{FeatureSpace, Namespace};
use crate::sparse::{FeatureId, SparseVector};

/// One observed user-item interaction as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub rating: Option<f64>,
    pub domain: Option<String>,
    /// Raw context values by dimension name. Multi-valued dimensions join
    /// their values with `|`.
    pub context: BTreeMap<String, String>,
}

impl Interaction {
    pub fn implicit(user: &str, item: &str) -> Self {
        Interaction {
            user: user.to_owned(),
            item: item.to_owned(),
            rating: None,
            domain: None,
            context: BTreeMap::new(),
        }
    }

    pub fn rated(user: &str, item: &str, rating: f64) -> Self {
        Interaction {
            rating: Some(rating),
            ..Interaction::implicit(user, item)
        }
    }

    pub fn in_domain(user: &str, item: &str, domain: &str) -> Self {
        Interaction {
            domain: Some(domain.to_owned()),
            ..Interaction::implicit(user, item)
        }
    }
}

/// Role of one column in an input file.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnRole {
    User,
    Item,
    Rating,
    Domain,
    /// Ignored column (`_` in the descriptor).
    Skip,
    /// Free-form context value for the named dimension.
    Context(String),
    /// One-hot flag column: when the cell is `1`, `value` is appended to the
    /// pipe-joined list of context dimension `dim` (`flag:dim:value`).
    Flag { dim: String, value: String },
}

/// How to read (or write) an interaction file.
#[derive(Debug, Clone)]
pub struct FormatDescriptor {
    pub columns: Vec<ColumnRole>,
    pub delimiter: u8,
    pub has_header: bool,
}

impl FormatDescriptor {
    /// Parse column names as they appear in a config file: `user`, `item`,
    /// `rating`, `domain`, `_` (skip), `flag:<dim>:<value>`, anything else is
    /// a context dimension name.
    pub fn from_column_names(names: &[&str], delimiter: u8, has_header: bool) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let role = match *name {
                "user" => ColumnRole::User,
                "item" => ColumnRole::Item,
                "rating" => ColumnRole::Rating,
                "domain" => ColumnRole::Domain,
                "_" => ColumnRole::Skip,
                other => {
                    if let Some(rest) = other.strip_prefix("flag:") {
                        let (dim, value) = rest.split_once(':').ok_or_else(|| {
                            Error::domain(format!(
                                "flag column `{other}` must look like flag:<dim>:<value>"
                            ))
                        })?;
                        ColumnRole::Flag {
                            dim: dim.to_owned(),
                            value: value.to_owned(),
                        }
                    } else {
                        ColumnRole::Context(other.to_owned())
                    }
                }
            };
            columns.push(role);
        }
        let desc = FormatDescriptor {
            columns,
            delimiter,
            has_header,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |role: fn(&ColumnRole) -> bool| self.columns.iter().filter(|c| role(c)).count();
        if count(|c| matches!(c, ColumnRole::User)) != 1 {
            return Err(Error::domain("descriptor needs exactly one `user` column"));
        }
        if count(|c| matches!(c, ColumnRole::Item)) != 1 {
            return Err(Error::domain("descriptor needs exactly one `item` column"));
        }
        if count(|c| matches!(c, ColumnRole::Rating)) > 1 {
            return Err(Error::domain("descriptor allows at most one `rating` column"));
        }
        if count(|c| matches!(c, ColumnRole::Domain)) > 1 {
            return Err(Error::domain("descriptor allows at most one `domain` column"));
        }
        let mut dims = HashSet::new();
        for c in &self.columns {
            if let ColumnRole::Context(d) = c {
                if !dims.insert(d.clone()) {
                    return Err(Error::domain(format!("duplicate context column `{d}`")));
                }
            }
        }
        Ok(())
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Read an interaction file. Every data row must have exactly as many fields
/// as the descriptor has columns; malformed rows report their line number.
pub fn parse_csv(path: &Path, fmt: &FormatDescriptor) -> Result<Vec<Interaction>> {
    fmt.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(fmt.delimiter)
        .has_headers(fmt.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;

    let mut out = Vec::new();
    for record in reader.byte_records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != fmt.columns.len() {
            return Err(parse_err(
                path,
                line,
                format!(
                    "expected {} fields, found {}",
                    fmt.columns.len(),
                    record.len()
                ),
            ));
        }

        let mut it = Interaction::implicit("", "");
        for (idx, role) in fmt.columns.iter().enumerate() {
            // lossy: legacy datasets mix encodings in free-text columns
            let field = String::from_utf8_lossy(record.get(idx).unwrap_or(b""));
            let field = field.as_ref();
            match role {
                ColumnRole::User => it.user = field.to_owned(),
                ColumnRole::Item => it.item = field.to_owned(),
                ColumnRole::Rating => {
                    if !field.is_empty() {
                        let r: f64 = field.parse().map_err(|_| {
                            parse_err(path, line, format!("bad rating `{field}`"))
                        })?;
                        it.rating = Some(r);
                    }
                }
                ColumnRole::Domain => {
                    if !field.is_empty() {
                        it.domain = Some(field.to_owned());
                    }
                }
                ColumnRole::Skip => {}
                ColumnRole::Context(dim) => {
                    if !field.is_empty() {
                        it.context.insert(dim.clone(), field.to_owned());
                    }
                }
                ColumnRole::Flag { dim, value } => match field {
                    "1" => {
                        it.context
                            .entry(dim.clone())
                            .and_modify(|v| {
                                v.push('|');
                                v.push_str(value);
                            })
                            .or_insert_with(|| value.clone());
                    }
                    "0" | "" => {}
                    other => {
                        return Err(parse_err(
                            path,
                            line,
                            format!("flag column expects 0/1, found `{other}`"),
                        ))
                    }
                },
            }
        }
        if it.user.is_empty() {
            return Err(parse_err(path, line, "empty user key"));
        }
        if it.item.is_empty() {
            return Err(parse_err(path, line, "empty item key"));
        }
        out.push(it);
    }
    Ok(out)
}

/// Write interactions back out under the same descriptor; the inverse of
/// [`parse_csv`] up to field formatting.
pub fn write_csv(path: &Path, data: &[Interaction], fmt: &FormatDescriptor) -> Result<()> {
    fmt.validate()?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(fmt.delimiter)
        .from_path(path)
        .map_err(io_like)?;
    if fmt.has_header {
        let header: Vec<String> = fmt
            .columns
            .iter()
            .map(|c| match c {
                ColumnRole::User => "user".to_owned(),
                ColumnRole::Item => "item".to_owned(),
                ColumnRole::Rating => "rating".to_owned(),
                ColumnRole::Domain => "domain".to_owned(),
                ColumnRole::Skip => "_".to_owned(),
                ColumnRole::Context(d) => d.clone(),
                ColumnRole::Flag { dim, value } => format!("flag:{dim}:{value}"),
            })
            .collect();
        writer.write_record(&header).map_err(io_like)?;
    }
    for it in data {
        let mut row = Vec::with_capacity(fmt.columns.len());
        for role in &fmt.columns {
            let cell = match role {
                ColumnRole::User => it.user.clone(),
                ColumnRole::Item => it.item.clone(),
                ColumnRole::Rating => it.rating.map(|r| format!("{r}")).unwrap_or_default(),
                ColumnRole::Domain => it.domain.clone().unwrap_or_default(),
                ColumnRole::Skip => String::new(),
                ColumnRole::Context(d) => it.context.get(d).cloned().unwrap_or_default(),
                ColumnRole::Flag { dim, value } => {
                    let set = it
                        .context
                        .get(dim)
                        .is_some_and(|v| v.split('|').any(|part| part == value));
                    if set { "1".to_owned() } else { "0".to_owned() }
                }
            };
            row.push(cell);
        }
        writer.write_record(&row).map_err(io_like)?;
    }
    writer.flush()?;
    Ok(())
}

fn io_like(e: csv::Error) -> Error {
    Error::domain(format!("csv write failed: {e}"))
}

/// Read a per-item context sidecar (e.g. item attributes): the descriptor
/// must name exactly one `item` column and may use `_`, context, and flag
/// columns. Returns item key -> context map; duplicate item rows keep the
/// first occurrence.
pub fn parse_item_context(
    path: &Path,
    column_names: &[&str],
    delimiter: u8,
    has_header: bool,
) -> Result<HashMap<String, BTreeMap<String, String>>> {
    let mut columns = Vec::with_capacity(column_names.len());
    for name in column_names {
        let role = match *name {
            "item" => ColumnRole::Item,
            "_" => ColumnRole::Skip,
            "user" | "rating" | "domain" => {
                return Err(Error::domain(format!(
                    "item context files do not take a `{name}` column"
                )))
            }
            other => {
                if let Some(rest) = other.strip_prefix("flag:") {
                    let (dim, value) = rest.split_once(':').ok_or_else(|| {
                        Error::domain(format!(
                            "flag column `{other}` must look like flag:<dim>:<value>"
                        ))
                    })?;
                    ColumnRole::Flag {
                        dim: dim.to_owned(),
                        value: value.to_owned(),
                    }
                } else {
                    ColumnRole::Context(other.to_owned())
                }
            }
        };
        columns.push(role);
    }
    if columns.iter().filter(|c| matches!(c, ColumnRole::Item)).count() != 1 {
        return Err(Error::domain(
            "item context descriptor needs exactly one `item` column",
        ));
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut out: HashMap<String, BTreeMap<String, String>> = HashMap::new();
    for record in reader.byte_records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != columns.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let mut item = String::new();
        let mut ctx = BTreeMap::new();
        for (idx, role) in columns.iter().enumerate() {
            let field = String::from_utf8_lossy(record.get(idx).unwrap_or(b""));
            let field = field.as_ref();
            match role {
                ColumnRole::Item => item = field.to_owned(),
                ColumnRole::Skip => {}
                ColumnRole::Context(dim) => {
                    if !field.is_empty() {
                        ctx.insert(dim.clone(), field.to_owned());
                    }
                }
                ColumnRole::Flag { dim, value } => match field {
                    "1" => {
                        ctx.entry(dim.clone())
                            .and_modify(|v: &mut String| {
                                v.push('|');
                                v.push_str(value);
                            })
                            .or_insert_with(|| value.clone());
                    }
                    "0" | "" => {}
                    other => {
                        return Err(parse_err(
                            path,
                            line,
                            format!("flag column expects 0/1, found `{other}`"),
                        ))
                    }
                },
                _ => unreachable!(),
            }
        }
        if item.is_empty() {
            return Err(parse_err(path, line, "empty item key"));
        }
        out.entry(item).or_insert(ctx);
    }
    Ok(out)
}

/// Keep only interactions rated strictly above their user's mean rating
/// (mean over that user's rows in `data`), then drop the ratings.
pub fn to_implicit(data: &[Interaction]) -> Result<Vec<Interaction>> {
    let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
    for (idx, it) in data.iter().enumerate() {
        let r = it.rating.ok_or_else(|| {
            Error::domain(format!(
                "interaction {idx} (user `{}`) has no rating; implicit mapping needs ratings",
                it.user
            ))
        })?;
        let e = sums.entry(&it.user).or_insert((0.0, 0));
        e.0 += r;
        e.1 += 1;
    }
    let mut out = Vec::new();
    for it in data {
        let (sum, count) = sums[it.user.as_str()];
        let mean = sum / count as f64;
        if it.rating.unwrap() > mean {
            let mut kept = it.clone();
            kept.rating = None;
            out.push(kept);
        }
    }
    Ok(out)
}

/// Iteratively drop interactions of users/items with fewer than `min_count`
/// interactions until both constraints hold simultaneously.
pub fn densify(mut data: Vec<Interaction>, min_count: usize) -> Vec<Interaction> {
    if min_count <= 1 {
        return data;
    }
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for it in &data {
            *users.entry(&it.user).or_default() += 1;
            *items.entry(&it.item).or_default() += 1;
        }
        let keep: Vec<bool> = data
            .iter()
            .map(|it| users[it.user.as_str()] >= min_count && items[it.item.as_str()] >= min_count)
            .collect();
        if keep.iter().all(|&k| k) {
            return data;
        }
        let mut idx = 0;
        data.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
    }
}

/// One cross-validation fold over interaction rows.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<Interaction>,
    pub test: Vec<Interaction>,
    /// Indices (into the input slice) of the test rows, ascending.
    pub test_indices: Vec<usize>,
}

/// Seeded random partition of the rows into `folds` near-equal test sets;
/// fold f pairs `(all - subset_f, subset_f)`.
pub fn kfold_split(data: &[Interaction], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    let assignments = kfold_indices(data.len(), folds, seed)?;
    Ok(materialize_folds(data, &assignments))
}

fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::domain("folds must be >= 2"));
    }
    if n < folds {
        return Err(Error::domain(format!(
            "cannot split {n} interactions into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(rng::mix(&[seed, rng::tags::KFOLD])));

    let base = n / folds;
    let rem = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut cursor = 0;
    for f in 0..folds {
        let size = base + usize::from(f < rem);
        let mut chunk: Vec<usize> = order[cursor..cursor + size].to_vec();
        chunk.sort_unstable();
        out.push(chunk);
        cursor += size;
    }
    Ok(out)
}

fn materialize_folds(data: &[Interaction], assignments: &[Vec<usize>]) -> Vec<Fold> {
    assignments
        .iter()
        .map(|test_indices| {
            let in_test: HashSet<usize> = test_indices.iter().copied().collect();
            let mut train = Vec::with_capacity(data.len() - test_indices.len());
            let mut test = Vec::with_capacity(test_indices.len());
            for (idx, it) in data.iter().enumerate() {
                if in_test.contains(&idx) {
                    test.push(it.clone());
                } else {
                    train.push(it.clone());
                }
            }
            Fold {
                train,
                test,
                test_indices: test_indices.clone(),
            }
        })
        .collect()
}

/// One fold of the cross-domain split: only target-domain rows are folded,
/// source-domain rows ride along unsplit.
#[derive(Debug, Clone)]
pub struct CdFold {
    /// Target-domain training rows.
    pub train: Vec<Interaction>,
    /// Target-domain test rows.
    pub test: Vec<Interaction>,
    /// All source-domain rows (feature history, or extra training rows).
    pub source: Vec<Interaction>,
    /// Indices into the input slice of the test rows, ascending.
    pub test_indices: Vec<usize>,
}

/// K-fold only the target-domain interactions; every row must carry a domain.
pub fn cross_domain_split(
    data: &[Interaction],
    target: &str,
    folds: usize,
    seed: u64,
) -> Result<Vec<CdFold>> {
    let mut target_rows = Vec::new();
    let mut source_rows = Vec::new();
    for (idx, it) in data.iter().enumerate() {
        match &it.domain {
            None => {
                return Err(Error::domain(format!(
                    "interaction {idx} (user `{}`) has no domain id; the cross-domain split needs one on every row",
                    it.user
                )))
            }
            Some(d) if d == target => target_rows.push(idx),
            Some(_) => source_rows.push(idx),
        }
    }
    if target_rows.is_empty() {
        return Err(Error::domain(format!(
            "target domain `{target}` has no interactions"
        )));
    }
    let assignments = kfold_indices(target_rows.len(), folds, seed)?;
    let source: Vec<Interaction> = source_rows.iter().map(|&i| data[i].clone()).collect();

    Ok(assignments
        .iter()
        .map(|local_test| {
            let test_set: HashSet<usize> = local_test.iter().copied().collect();
            let mut train = Vec::new();
            let mut test = Vec::new();
            let mut test_indices = Vec::with_capacity(local_test.len());
            for (local, &orig) in target_rows.iter().enumerate() {
                if test_set.contains(&local) {
                    test.push(data[orig].clone());
                    test_indices.push(orig);
                } else {
                    train.push(data[orig].clone());
                }
            }
            CdFold {
                train,
                test,
                source: source.clone(),
                test_indices,
            }
        })
        .collect())
}

/// Render fold test indices as the audit manifest: a `# fold f` header line
/// followed by one interaction index per line.
pub fn render_fold_manifest(test_indices_per_fold: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for (f, indices) in test_indices_per_fold.iter().enumerate() {
        let _ = writeln!(out, "# fold {f}");
        for idx in indices {
            let _ = writeln!(out, "{idx}");
        }
    }
    out
}

/// One indexed positive interaction inside a [`Dataset`].
#[derive(Debug, Clone)]
pub struct Record {
    pub user: FeatureId,
    pub item: FeatureId,
    pub aux: SparseVector,
}

/// An indexed training fold: interned positives, per-user positive item sets,
/// and the item universe (exactly the items seen in these rows).
#[derive(Debug, Clone)]
pub struct Dataset {
    space: FeatureSpace,
    records: Vec<Record>,
    /// Sorted positive item fids per user ordinal.
    user_items: Vec<Vec<FeatureId>>,
    trainable: bool,
}

impl Dataset {
    /// Index interactions without auxiliary features.
    pub fn from_interactions(train: &[Interaction]) -> Result<Dataset> {
        Self::from_interactions_with_aux(train, |_, _| Ok(SparseVector::empty()))
    }

    /// Index interactions, attaching an auxiliary vector to each positive via
    /// `attach` (which may intern aux features). Duplicate `(user, item)`
    /// rows collapse to the first occurrence.
    pub fn from_interactions_with_aux(
        train: &[Interaction],
        mut attach: impl FnMut(&Interaction, &mut FeatureSpace) -> Result<SparseVector>,
    ) -> Result<Dataset> {
        let mut space = FeatureSpace::new();
        for it in train {
            if it.user.is_empty() || it.item.is_empty() {
                return Err(Error::domain("user and item keys must be nonempty"));
            }
            space.intern(Namespace::User, &it.user)?;
        }
        for it in train {
            space.intern(Namespace::Item, &it.item)?;
        }

        let mut seen: HashSet<(FeatureId, FeatureId)> = HashSet::new();
        let mut records = Vec::with_capacity(train.len());
        for it in train {
            let user = space.id(Namespace::User, &it.user).unwrap();
            let item = space.id(Namespace::Item, &it.item).unwrap();
            if !seen.insert((user, item)) {
                continue;
            }
            let aux = attach(it, &mut space)?;
            for (z, _) in aux.iter() {
                match space.namespace_of(z) {
                    Some(Namespace::Aux) => {}
                    _ => {
                        return Err(Error::domain(format!(
                            "attached vector holds feature {z} outside the aux namespace"
                        )))
                    }
                }
            }
            records.push(Record { user, item, aux });
        }

        let mut user_items = vec![Vec::new(); space.user_count()];
        for rec in &records {
            user_items[rec.user as usize].push(rec.item);
        }
        for list in &mut user_items {
            list.sort_unstable();
        }
        let n_items = space.item_count();
        let trainable = !records.is_empty() && user_items.iter().any(|v| v.len() < n_items);

        Ok(Dataset {
            space,
            records,
            user_items,
            trainable,
        })
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// Number of positive interactions, `|D|`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.space.user_count()
    }

    pub fn item_count(&self) -> usize {
        self.space.item_count()
    }

    /// Sorted positive item fids of a user.
    pub fn user_items(&self, user: FeatureId) -> &[FeatureId] {
        &self.user_items[user as usize]
    }

    pub fn user_has_item(&self, user: FeatureId, item: FeatureId) -> bool {
        self.user_items[user as usize].binary_search(&item).is_ok()
    }

    pub fn item_fid(&self, ordinal: usize) -> FeatureId {
        self.space.item_fid(ordinal)
    }

    /// Item universe as feature ids.
    pub fn items(&self) -> impl Iterator<Item = FeatureId> + '_ {
        (0..self.item_count()).map(|o| self.space.item_fid(o))
    }

    /// Whether at least one user has an unobserved item.
    pub fn trainable(&self) -> bool {
        self.trainable
    }
}
