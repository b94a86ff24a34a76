//! The mapping document: for every warehouse element, its source
//! correspondences with semantic relations, plus the decision-maker's
//! conditions and transform specs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::condition::{parse_condition, Condition, ConditionSyntaxError};
use crate::ident::Ident;
use crate::plan::{check_condition, AggFn, ColumnRef, Conversion, DatePartKind, ScalarExpr};
use crate::schema::SourceSchema;
use crate::star::{AttrKind, StarSchema};
use crate::value::DataType;
use crate::xml::{self, Location, XmlError};
use crate::{sort_violations, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct MappingDoc {
    pub fact_entry: FactMapping,
    pub dimension_entries: Vec<DimensionMapping>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactMapping {
    pub fact: Ident,
    pub primary_source_table: Ident,
    pub measure_entries: Vec<AttributeMapping>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionMapping {
    pub dimension: Ident,
    pub primary_source_table: Ident,
    /// The dimension-level relation shown in the mapping table; entry
    /// classification uses the per-correspondence relations.
    pub relation: SemanticRelation,
    pub hierarchy: Option<Ident>,
    pub attribute_entries: Vec<AttributeMapping>,
}

/// What a mapping entry loads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Parameter,
    WeakAttribute,
    Measure,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Parameter => "parameter",
            TargetKind::WeakAttribute => "weakattr",
            TargetKind::Measure => "measure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMapping {
    /// Owning dimension or fact.
    pub owner: Ident,
    pub target: Ident,
    pub kind: TargetKind,
    pub correspondences: Vec<Correspondence>,
    pub transform: Option<TransformSpec>,
}

impl AttributeMapping {
    pub fn path(&self) -> String {
        format!("{}.{}", self.owner, self.target)
    }

    /// Cardinality: the number of source attributes mapped.
    pub fn card(&self) -> usize {
        self.correspondences.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub table: Ident,
    pub attribute: Ident,
    pub relation: SemanticRelation,
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticRelation {
    Synonymie,
    Hyperonyme,
    Hyponyme,
    Holonyme,
    Meronyme,
}

impl SemanticRelation {
    pub fn name(self) -> &'static str {
        match self {
            SemanticRelation::Synonymie => "synonymie",
            SemanticRelation::Hyperonyme => "hyperonyme",
            SemanticRelation::Hyponyme => "hyponyme",
            SemanticRelation::Holonyme => "holonyme",
            SemanticRelation::Meronyme => "meronyme",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "synonymie" => Some(SemanticRelation::Synonymie),
            "hyperonyme" => Some(SemanticRelation::Hyperonyme),
            "hyponyme" => Some(SemanticRelation::Hyponyme),
            "holonyme" => Some(SemanticRelation::Holonyme),
            "meronyme" => Some(SemanticRelation::Meronyme),
            _ => None,
        }
    }
}

/// At most one per entry; drives which composition rule applies.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    Concat(ConcatSpec),
    Split(SplitSpec),
    Convert(ConvertSpec),
    Aggregate(AggregateSpec),
    DateParts(DatePartsSpec),
}

impl TransformSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Concat(_) => "concat",
            TransformSpec::Split(_) => "split",
            TransformSpec::Convert(_) => "convert",
            TransformSpec::Aggregate(_) => "aggregate",
            TransformSpec::DateParts(_) => "dateparts",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcatSpec {
    /// Source attributes in concatenation order.
    pub order: Vec<Ident>,
    pub separator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// (target attribute, zero-based part index); indices contiguous from 0.
    pub parts: Vec<(Ident, usize)>,
    pub delimiter: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertSpec {
    pub conversion: Conversion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSpec {
    pub function: AggFn,
    pub convert: Option<ConvertSpec>,
    /// Optional arithmetic formula over source attributes; references
    /// resolve against the correspondence tables and the owner's
    /// primary source table.
    pub formula: Option<ScalarExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatePartsSpec {
    /// (output name, date part), covering the owning dimension's
    /// attributes positionally from the entry's target onward. Output
    /// names are select-list aliases and need not equal attribute names.
    pub parts: Vec<(Ident, DatePartKind)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },
    #[error("mapping error: {detail}")]
    Mapping { detail: String },
    #[error("{path}: {source}")]
    Condition { path: String, source: ConditionSyntaxError },
}

impl From<XmlError> for MappingError {
    fn from(e: XmlError) -> Self {
        MappingError::Syntax { at: e.at, message: e.message }
    }
}

fn mapping_err(detail: impl Into<String>) -> MappingError {
    MappingError::Mapping { detail: detail.into() }
}

/// Parse a mapping document. Local invariants (known relation names,
/// well-formed transform specs, at most one transform per target) are
/// enforced here; cross-document references wait for [`validate_mapping`].
pub fn parse_mapping(text: &str) -> Result<MappingDoc, MappingError> {
    let doc = xml::parse(text)?;
    let root = xml::root(&doc, "mapping")?;
    xml::check_attrs(&doc, root, &["fact"])?;
    let fact_name = Ident::new(xml::require_attr(&doc, root, "fact")?);

    let mut fact_entry: Option<FactMapping> = None;
    let mut dimension_entries = Vec::new();
    for node in xml::children(&doc, root, &["dimension", "fact"])? {
        match node.tag_name().name() {
            "dimension" => {
                xml::check_attrs(&doc, node, &["name", "source", "relation", "hierarchy"])?;
                let name = Ident::new(xml::require_attr(&doc, node, "name")?);
                let source = Ident::new(xml::require_attr(&doc, node, "source")?);
                let relation_text = xml::require_attr(&doc, node, "relation")?;
                let relation = SemanticRelation::parse(relation_text)
                    .ok_or_else(|| mapping_err(format!("unknown relation `{relation_text}`")))?;
                let hierarchy = node.attribute("hierarchy").map(Ident::new);
                let mut attribute_entries = Vec::new();
                for target in xml::children(&doc, node, &["target"])? {
                    attribute_entries.push(parse_target(&doc, target, &name, false)?);
                }
                dimension_entries.push(DimensionMapping {
                    dimension: name,
                    primary_source_table: source,
                    relation,
                    hierarchy,
                    attribute_entries,
                });
            }
            _ => {
                if fact_entry.is_some() {
                    return Err(mapping_err("more than one fact element"));
                }
                xml::check_attrs(&doc, node, &["name", "source"])?;
                let name = Ident::new(xml::require_attr(&doc, node, "name")?);
                if name != fact_name {
                    return Err(mapping_err(format!(
                        "fact element `{name}` does not match mapping fact `{fact_name}`"
                    )));
                }
                let source = Ident::new(xml::require_attr(&doc, node, "source")?);
                let mut measure_entries = Vec::new();
                for target in xml::children(&doc, node, &["target"])? {
                    measure_entries.push(parse_target(&doc, target, &name, true)?);
                }
                fact_entry = Some(FactMapping {
                    fact: name,
                    primary_source_table: source,
                    measure_entries,
                });
            }
        }
    }

    let fact_entry = fact_entry.ok_or_else(|| mapping_err("document declares no fact element"))?;
    Ok(MappingDoc { fact_entry, dimension_entries })
}

fn parse_target(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
    owner: &Ident,
    measure: bool,
) -> Result<AttributeMapping, MappingError> {
    xml::check_attrs(doc, node, &["name", "kind"])?;
    let target = Ident::new(xml::require_attr(doc, node, "name")?);
    let path = format!("{owner}.{target}");
    let kind_text = xml::require_attr(doc, node, "kind")?;
    let kind = match (kind_text, measure) {
        ("measure", true) => TargetKind::Measure,
        ("parameter", false) => TargetKind::Parameter,
        ("weakattr", false) => TargetKind::WeakAttribute,
        _ => {
            return Err(mapping_err(format!("{path}: kind `{kind_text}` not allowed here")));
        }
    };

    let mut correspondences = Vec::new();
    let mut transform: Option<TransformSpec> = None;
    for child in xml::children(doc, node, &["corr", "concat", "split", "convert", "aggregate", "dateparts"])? {
        let tag = child.tag_name().name();
        if tag == "corr" {
            xml::check_attrs(doc, child, &["table", "attribute", "relation", "condition"])?;
            let table = Ident::new(xml::require_attr(doc, child, "table")?);
            let attribute = Ident::new(xml::require_attr(doc, child, "attribute")?);
            let relation_text = xml::require_attr(doc, child, "relation")?;
            let relation = SemanticRelation::parse(relation_text).ok_or_else(|| {
                mapping_err(format!("{path}: unknown relation `{relation_text}`"))
            })?;
            let condition = match child.attribute("condition") {
                None => None,
                Some(text) => Some(parse_condition(text).map_err(|source| {
                    MappingError::Condition { path: path.clone(), source }
                })?),
            };
            correspondences.push(Correspondence { table, attribute, relation, condition });
            continue;
        }
        let spec = match tag {
            "concat" => {
                xml::check_attrs(doc, child, &["order", "separator"])?;
                let order = split_list(xml::require_attr(doc, child, "order")?)
                    .map(Ident::new)
                    .collect::<Vec<_>>();
                if order.is_empty() {
                    return Err(mapping_err(format!("{path}: concat order is empty")));
                }
                let separator = xml::require_attr(doc, child, "separator")?.to_string();
                TransformSpec::Concat(ConcatSpec { order, separator })
            }
            "split" => {
                xml::check_attrs(doc, child, &["delimiter", "parts"])?;
                let delimiter = xml::require_attr(doc, child, "delimiter")?.to_string();
                if delimiter.is_empty() {
                    return Err(mapping_err(format!("{path}: split delimiter is empty")));
                }
                let mut parts = Vec::new();
                for item in split_list(xml::require_attr(doc, child, "parts")?) {
                    let (name, index) = item.split_once(':').ok_or_else(|| {
                        mapping_err(format!("{path}: split part `{item}` must be `name:index`"))
                    })?;
                    let index: usize = index.trim().parse().map_err(|_| {
                        mapping_err(format!("{path}: split part index `{index}` is not a number"))
                    })?;
                    parts.push((Ident::new(name.trim()), index));
                }
                // indices must be contiguous from 0 in listed order
                for (expected, (name, index)) in parts.iter().enumerate() {
                    if *index != expected {
                        return Err(mapping_err(format!(
                            "{path}: split part `{name}` has index {index}, expected {expected}"
                        )));
                    }
                }
                if parts.is_empty() {
                    return Err(mapping_err(format!("{path}: split parts are empty")));
                }
                TransformSpec::Split(SplitSpec { parts, delimiter })
            }
            "convert" => {
                xml::check_attrs(doc, child, &["from", "to"])?;
                let from = xml::require_attr(doc, child, "from")?;
                let to = xml::require_attr(doc, child, "to")?;
                let conversion = Conversion::from_formats(from, to).ok_or_else(|| {
                    mapping_err(format!("{path}: no conversion from `{from}` to `{to}`"))
                })?;
                TransformSpec::Convert(ConvertSpec { conversion })
            }
            "aggregate" => {
                xml::check_attrs(doc, child, &["fn", "formula", "convert-from", "convert-to"])?;
                let fn_text = xml::require_attr(doc, child, "fn")?;
                let function = AggFn::parse(fn_text).ok_or_else(|| {
                    mapping_err(format!("{path}: unknown aggregation `{fn_text}`"))
                })?;
                let convert = match (child.attribute("convert-from"), child.attribute("convert-to")) {
                    (None, None) => None,
                    (Some(from), Some(to)) => {
                        let conversion = Conversion::from_formats(from, to).ok_or_else(|| {
                            mapping_err(format!("{path}: no conversion from `{from}` to `{to}`"))
                        })?;
                        Some(ConvertSpec { conversion })
                    }
                    _ => {
                        return Err(mapping_err(format!(
                            "{path}: convert-from and convert-to must appear together"
                        )))
                    }
                };
                let formula = match child.attribute("formula") {
                    None => None,
                    Some(text) => Some(parse_formula(text).map_err(|e| {
                        mapping_err(format!("{path}: bad formula: {e}"))
                    })?),
                };
                TransformSpec::Aggregate(AggregateSpec { function, convert, formula })
            }
            _ => {
                xml::check_attrs(doc, child, &["spec"])?;
                let mut parts = Vec::new();
                for item in split_list(xml::require_attr(doc, child, "spec")?) {
                    let (name, part) = item.split_once(':').ok_or_else(|| {
                        mapping_err(format!("{path}: dateparts item `{item}` must be `name:part`"))
                    })?;
                    let part = DatePartKind::parse(part.trim()).ok_or_else(|| {
                        mapping_err(format!("{path}: unknown date part `{part}`"))
                    })?;
                    parts.push((Ident::new(name.trim()), part));
                }
                if parts.is_empty() {
                    return Err(mapping_err(format!("{path}: dateparts spec is empty")));
                }
                TransformSpec::DateParts(DatePartsSpec { parts })
            }
        };
        if transform.is_some() {
            return Err(mapping_err(format!("{path}: more than one transform spec")));
        }
        transform = Some(spec);
    }

    if correspondences.is_empty() {
        return Err(mapping_err(format!("{path}: entry has no correspondences")));
    }
    Ok(AttributeMapping { owner: owner.clone(), target, kind, correspondences, transform })
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parse an arithmetic formula over source attributes:
/// `expr := term (('+'|'-') term)*; term := factor (('*'|'/') factor)*;
/// factor := number | column | '(' expr ')'` where a column is
/// `name` or `table.name` (letters, digits, underscore).
pub fn parse_formula(text: &str) -> Result<ScalarExpr, String> {
    let mut p = FormulaParser { text: text.as_bytes(), pos: 0 };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.text.len() {
        return Err(format!("trailing input at offset {}", p.pos));
    }
    Ok(expr)
}

struct FormulaParser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> FormulaParser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, String> {
        use crate::plan::ArithOp;
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.text.get(self.pos) {
                Some(b'+') => ArithOp::Add,
                Some(b'-') => ArithOp::Sub,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.term()?;
            node = ScalarExpr::arith(op, node, rhs);
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, String> {
        use crate::plan::ArithOp;
        let mut node = self.factor()?;
        loop {
            self.skip_ws();
            let op = match self.text.get(self.pos) {
                Some(b'*') => ArithOp::Mul,
                Some(b'/') => ArithOp::Div,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            node = ScalarExpr::arith(op, node, rhs);
        }
    }

    fn factor(&mut self) -> Result<ScalarExpr, String> {
        use crate::plan::Literal;
        self.skip_ws();
        match self.text.get(self.pos) {
            None => Err("unexpected end of formula".into()),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.text.get(self.pos) == Some(&b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(format!("expected `)` at offset {}", self.pos))
                }
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.text.len()
                    && (self.text[self.pos].is_ascii_digit() || self.text[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                let literal = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
                crate::value::parse_decimal(literal)
                    .map(|d| ScalarExpr::Literal(Literal::Number(d)))
                    .ok_or_else(|| format!("bad number `{literal}`"))
            }
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => {
                let first = self.identifier();
                if self.text.get(self.pos) == Some(&b'.') {
                    self.pos += 1;
                    let second = self.identifier();
                    if second.is_empty() {
                        return Err(format!("expected column after `.` at offset {}", self.pos));
                    }
                    Ok(ScalarExpr::Column(ColumnRef::qualified(first, second)))
                } else {
                    Ok(ScalarExpr::Column(ColumnRef::bare(first)))
                }
            }
            Some(c) => Err(format!("unexpected `{}` at offset {}", *c as char, self.pos)),
        }
    }

    fn identifier(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_alphanumeric() || self.text[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.text[start..self.pos]).into_owned()
    }
}

/// Columns referenced by a formula.
pub fn formula_columns(expr: &ScalarExpr) -> Vec<&ColumnRef> {
    fn walk<'a>(e: &'a ScalarExpr, out: &mut Vec<&'a ColumnRef>) {
        match e {
            ScalarExpr::Column(r) => out.push(r),
            ScalarExpr::Arith { left, right, .. } => {
                walk(left, out);
                walk(right, out);
            }
            ScalarExpr::Literal(_) => {}
            ScalarExpr::DatePart { column, .. } => out.push(column),
        }
    }
    let mut out = Vec::new();
    walk(expr, &mut out);
    out
}

/// Cross-document validation. Empty iff every target exists in the
/// star, every correspondence resolves in the source schema, condition
/// value types match column types, and transform arity matches
/// correspondence cardinality. Violations sort by element path.
pub fn validate_mapping(
    mapping: &MappingDoc,
    src: &SourceSchema,
    star: &StarSchema,
) -> Vec<Violation> {
    let mut violations = Vec::new();

    let fact = &mapping.fact_entry;
    if !star.fact.name.matches(fact.fact.as_str()) {
        violations.push(Violation::new(
            fact.fact.to_string(),
            format!("mapping fact `{}` is not the star fact `{}`", fact.fact, star.fact.name),
        ));
    }
    if src.table(fact.primary_source_table.as_str()).is_none() {
        violations.push(Violation::new(
            fact.fact.to_string(),
            format!("unknown source table `{}`", fact.primary_source_table),
        ));
    }
    let mut covered_measures: BTreeSet<String> = BTreeSet::new();
    for entry in &fact.measure_entries {
        if star.fact.measure(entry.target.as_str()).is_none() {
            violations.push(Violation::new(
                entry.path(),
                format!("fact `{}` declares no measure `{}`", star.fact.name, entry.target),
            ));
        } else {
            covered_measures.insert(entry.target.folded().to_string());
        }
        validate_entry(entry, Some(&fact.primary_source_table), None, src, &mut violations);
    }
    for measure in &star.fact.measures {
        if !covered_measures.contains(measure.name.folded()) {
            violations.push(Violation::new(
                format!("{}.{}", star.fact.name, measure.name),
                "measure has no mapping entry".to_string(),
            ));
        }
    }

    for dim_entry in &mapping.dimension_entries {
        let dim = star.dimension(dim_entry.dimension.as_str());
        if dim.is_none() {
            violations.push(Violation::new(
                dim_entry.dimension.to_string(),
                format!("star declares no dimension `{}`", dim_entry.dimension),
            ));
        }
        if src.table(dim_entry.primary_source_table.as_str()).is_none() {
            violations.push(Violation::new(
                dim_entry.dimension.to_string(),
                format!("unknown source table `{}`", dim_entry.primary_source_table),
            ));
        }
        if let (Some(dim), Some(h)) = (dim, &dim_entry.hierarchy) {
            if dim.hierarchy(h.as_str()).is_none() {
                violations.push(Violation::new(
                    dim_entry.dimension.to_string(),
                    format!("dimension `{}` declares no hierarchy `{h}`", dim.name),
                ));
            }
        }

        // each dimension attribute must be covered exactly once: by its
        // own entry, a split part, or a dateparts positional span
        let mut covered: Vec<(String, String)> = Vec::new();
        for entry in &dim_entry.attribute_entries {
            validate_entry(entry, Some(&dim_entry.primary_source_table), dim, src, &mut violations);
            let origin = entry.path();
            match &entry.transform {
                Some(TransformSpec::Split(split)) => {
                    for (name, _) in &split.parts {
                        covered.push((name.folded().to_string(), origin.clone()));
                    }
                }
                Some(TransformSpec::DateParts(parts)) => {
                    if let Some(dim) = dim {
                        if let Some(start) =
                            dim.attributes.iter().position(|a| a.name == entry.target)
                        {
                            for (offset, _) in parts.parts.iter().enumerate() {
                                if let Some(attr) = dim.attributes.get(start + offset) {
                                    covered.push((attr.name.folded().to_string(), origin.clone()));
                                }
                            }
                        }
                    }
                }
                _ => covered.push((entry.target.folded().to_string(), origin.clone())),
            }
        }
        if let Some(dim) = dim {
            for attr in &dim.attributes {
                let hits: Vec<&(String, String)> =
                    covered.iter().filter(|(name, _)| name == attr.name.folded()).collect();
                let path = format!("{}.{}", dim.name, attr.name);
                if hits.is_empty() {
                    violations.push(Violation::new(path, "attribute has no mapping entry"));
                } else if hits.len() > 1 {
                    violations.push(Violation::new(
                        path,
                        format!("attribute covered by {} entries", hits.len()),
                    ));
                }
            }
        }
    }

    sort_violations(&mut violations);
    violations
}

fn validate_entry(
    entry: &AttributeMapping,
    primary_source: Option<&Ident>,
    dim: Option<&crate::star::Dimension>,
    src: &SourceSchema,
    violations: &mut Vec<Violation>,
) {
    let path = entry.path();
    let mut corr_tables: Vec<Ident> = Vec::new();
    for corr in &entry.correspondences {
        match src.table(corr.table.as_str()) {
            None => {
                violations.push(Violation::new(
                    &path,
                    format!("unknown source table `{}`", corr.table),
                ));
                continue;
            }
            Some(table) => {
                if !corr_tables.iter().any(|t| t == &table.name) {
                    corr_tables.push(table.name.clone());
                }
                match table.column(corr.attribute.as_str()) {
                    None => violations.push(Violation::new(
                        &path,
                        format!("unknown source column `{}.{}`", corr.table, corr.attribute),
                    )),
                    Some(column) => {
                        if let Some(condition) = &corr.condition {
                            let colref = ColumnRef::qualified(
                                table.name.clone(),
                                column.name.clone(),
                            );
                            if let Err(detail) =
                                check_condition(condition, column.data_type, &colref)
                            {
                                violations.push(Violation::new(&path, detail));
                            }
                        }
                    }
                }
            }
        }
    }

    match &entry.transform {
        None => {}
        Some(TransformSpec::Concat(spec)) => {
            if entry.card() < 2 {
                violations.push(Violation::new(
                    &path,
                    format!("concat needs at least 2 correspondences, found {}", entry.card()),
                ));
            }
            for name in &spec.order {
                if !entry.correspondences.iter().any(|c| c.attribute == *name) {
                    violations.push(Violation::new(
                        &path,
                        format!("concat order names `{name}`, which no correspondence maps"),
                    ));
                }
            }
        }
        Some(TransformSpec::Split(_)) => {
            if entry.card() != 1 {
                violations.push(Violation::new(
                    &path,
                    format!("split needs exactly 1 correspondence, found {}", entry.card()),
                ));
            }
        }
        Some(TransformSpec::Convert(_)) => {
            if entry.card() != 1 {
                violations.push(Violation::new(
                    &path,
                    format!("convert needs exactly 1 correspondence, found {}", entry.card()),
                ));
            }
        }
        Some(TransformSpec::Aggregate(spec)) => {
            if entry.card() != 1 {
                violations.push(Violation::new(
                    &path,
                    format!("aggregate needs exactly 1 correspondence, found {}", entry.card()),
                ));
            }
            if let Some(formula) = &spec.formula {
                let mut allowed = corr_tables.clone();
                if let Some(primary) = primary_source {
                    if !allowed.iter().any(|t| t == primary) {
                        allowed.push(primary.clone());
                    }
                }
                for colref in formula_columns(formula) {
                    let resolved = resolve_formula_column(colref, &allowed, src);
                    if let Err(detail) = resolved {
                        violations.push(Violation::new(&path, detail));
                    }
                }
            }
        }
        Some(TransformSpec::DateParts(spec)) => {
            if entry.card() != 1 {
                violations.push(Violation::new(
                    &path,
                    format!("dateparts needs exactly 1 correspondence, found {}", entry.card()),
                ));
            }
            if let Some(corr) = entry.correspondences.first() {
                if let Some(column) = src
                    .table(corr.table.as_str())
                    .and_then(|t| t.column(corr.attribute.as_str()))
                {
                    if column.data_type != DataType::Date {
                        violations.push(Violation::new(
                            &path,
                            format!(
                                "dateparts source `{}.{}` must be a date column",
                                corr.table, corr.attribute
                            ),
                        ));
                    }
                }
            }
            if let Some(dim) = dim {
                match dim.attributes.iter().position(|a| a.name == entry.target) {
                    None => {}
                    Some(start) => {
                        if start + spec.parts.len() > dim.attributes.len() {
                            violations.push(Violation::new(
                                &path,
                                format!(
                                    "dateparts lists {} parts but only {} attributes follow `{}`",
                                    spec.parts.len(),
                                    dim.attributes.len() - start,
                                    entry.target
                                ),
                            ));
                        } else {
                            for (offset, (_, part)) in spec.parts.iter().enumerate() {
                                let attr = &dim.attributes[start + offset];
                                // day loads the raw date; other parts type per the catalog
                                let produced = match part {
                                    DatePartKind::Day => DataType::Date,
                                    other => other.output_type(),
                                };
                                if attr.data_type != produced {
                                    violations.push(Violation::new(
                                        &path,
                                        format!(
                                            "date part `{}` produces {} but `{}` is {}",
                                            part.name(),
                                            produced,
                                            attr.name,
                                            attr.data_type
                                        ),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // target existence inside the dimension (fact measures are checked
    // by the caller); split parts name attributes directly
    if let Some(dim) = dim {
        match &entry.transform {
            Some(TransformSpec::Split(split)) => {
                for (name, _) in &split.parts {
                    if dim.attribute(name.as_str()).is_none() {
                        violations.push(Violation::new(
                            entry.path(),
                            format!("split part `{name}` names no attribute of `{}`", dim.name),
                        ));
                    }
                }
            }
            _ => {
                if dim.attribute(entry.target.as_str()).is_none() {
                    violations.push(Violation::new(
                        entry.path(),
                        format!("dimension `{}` declares no attribute `{}`", dim.name, entry.target),
                    ));
                }
            }
        }
    }
}

pub(crate) fn resolve_formula_column<'s>(
    colref: &ColumnRef,
    allowed_tables: &[Ident],
    src: &'s SourceSchema,
) -> Result<(&'s crate::schema::Table, &'s crate::schema::Column), String> {
    match &colref.table {
        Some(table) => {
            if !allowed_tables.iter().any(|t| t == table) {
                return Err(format!(
                    "formula references `{colref}` outside the entry's tables"
                ));
            }
            let t = src
                .table(table.as_str())
                .ok_or_else(|| format!("formula references unknown table `{table}`"))?;
            let c = t
                .column(colref.column.as_str())
                .ok_or_else(|| format!("formula references unknown column `{colref}`"))?;
            Ok((t, c))
        }
        None => {
            let mut hits = Vec::new();
            for table in allowed_tables {
                if let Some(t) = src.table(table.as_str()) {
                    if let Some(c) = t.column(colref.column.as_str()) {
                        hits.push((t, c));
                    }
                }
            }
            match hits.len() {
                0 => Err(format!("formula references unknown column `{colref}`")),
                1 => Ok(hits[0]),
                _ => Err(format!("formula column `{colref}` is ambiguous")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_source_schema;
    use crate::star::parse_star_schema;

    const MAPPING: &str = include_str!("../../../fixtures/sales/mapping.xml");
    const SCHEMA: &str = include_str!("../../../fixtures/sales/schema.xml");
    const STAR: &str = include_str!("../../../fixtures/sales/star.xml");

    fn fixtures() -> (MappingDoc, SourceSchema, StarSchema) {
        (
            parse_mapping(MAPPING).unwrap(),
            parse_source_schema(SCHEMA).unwrap(),
            parse_star_schema(STAR).unwrap(),
        )
    }

    #[test]
    fn parses_the_sales_mapping() {
        let mapping = parse_mapping(MAPPING).unwrap();
        assert_eq!(mapping.dimension_entries.len(), 3);
        assert_eq!(mapping.fact_entry.measure_entries.len(), 2);
        let temps = &mapping.dimension_entries[2];
        assert_eq!(temps.relation, SemanticRelation::Hyperonyme);
        assert_eq!(temps.primary_source_table, Ident::new("facture"));
    }

    #[test]
    fn adresse_entry_has_two_hyponyme_correspondences_and_a_concat() {
        let mapping = parse_mapping(MAPPING).unwrap();
        let client = &mapping.dimension_entries[0];
        let adresse = client
            .attribute_entries
            .iter()
            .find(|e| e.target == Ident::new("adresse"))
            .unwrap();
        assert_eq!(adresse.card(), 2);
        assert!(adresse
            .correspondences
            .iter()
            .all(|c| c.relation == SemanticRelation::Hyponyme));
        assert!(matches!(adresse.transform, Some(TransformSpec::Concat(_))));
    }

    #[test]
    fn rejects_unknown_relation() {
        let text = MAPPING.replacen("synonymie", "antonymie", 1);
        match parse_mapping(&text) {
            Err(MappingError::Mapping { detail }) => assert!(detail.contains("antonymie")),
            other => panic!("expected MappingError, got {other:?}"),
        }
    }

    #[test]
    fn rejects_two_transforms_on_one_target() {
        let text = MAPPING.replace(
            "<concat order=\"codepostale,ville\" separator=\" \"/>",
            "<concat order=\"codepostale,ville\" separator=\" \"/><convert from=\"date\" to=\"string\"/>",
        );
        assert!(matches!(parse_mapping(&text), Err(MappingError::Mapping { .. })));
    }

    #[test]
    fn rejects_non_contiguous_split_indices() {
        let text = r#"<mapping fact="f">
          <fact name="f" source="t">
            <target name="m" kind="measure"><corr table="t" attribute="a" relation="synonymie"/></target>
          </fact>
          <dimension name="d" source="t" relation="synonymie">
            <target name="x" kind="parameter">
              <corr table="t" attribute="a" relation="hyponyme"/>
              <split delimiter="-" parts="x:0,y:2"/>
            </target>
          </dimension>
        </mapping>"#;
        match parse_mapping(text) {
            Err(MappingError::Mapping { detail }) => assert!(detail.contains("expected 1")),
            other => panic!("expected MappingError, got {other:?}"),
        }
    }

    #[test]
    fn sales_fixture_validates_cleanly() {
        let (mapping, src, star) = fixtures();
        assert_eq!(validate_mapping(&mapping, &src, &star), vec![]);
    }

    #[test]
    fn unknown_source_column_is_one_violation() {
        let (mut mapping, src, star) = fixtures();
        mapping.dimension_entries[0].attribute_entries[1].correspondences[0].attribute =
            Ident::new("telephone");
        let violations = validate_mapping(&mapping, &src, &star);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("telephone"));
    }

    #[test]
    fn concat_with_single_correspondence_is_a_violation() {
        let (mut mapping, src, star) = fixtures();
        let adresse = mapping.dimension_entries[0]
            .attribute_entries
            .iter_mut()
            .find(|e| e.target == Ident::new("adresse"))
            .unwrap();
        adresse.correspondences.truncate(1);
        let violations = validate_mapping(&mapping, &src, &star);
        assert!(violations.iter().any(|v| v.message.contains("at least 2")));
    }

    #[test]
    fn condition_type_mismatch_is_reported() {
        let (mut mapping, src, star) = fixtures();
        // numeric comparison on the string column `nom`
        mapping.dimension_entries[0].attribute_entries[1].correspondences[0].condition =
            Some(parse_condition(">(5)").unwrap());
        let violations = validate_mapping(&mapping, &src, &star);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("numeric comparison"));
    }

    #[test]
    fn violations_are_sorted_by_path() {
        let (mut mapping, src, star) = fixtures();
        mapping.dimension_entries[1].attribute_entries[0].correspondences[0].attribute =
            Ident::new("zz");
        mapping.dimension_entries[0].attribute_entries[0].correspondences[0].attribute =
            Ident::new("yy");
        let violations = validate_mapping(&mapping, &src, &star);
        let paths: Vec<&str> = violations.iter().map(|v| v.path.as_str()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(paths, sorted);
    }

    #[test]
    fn formula_parses_with_precedence() {
        use crate::plan::{ArithOp, Literal};
        let f = parse_formula("prix_total / quantite").unwrap();
        assert_eq!(
            f,
            ScalarExpr::arith(
                ArithOp::Div,
                ScalarExpr::Column(ColumnRef::bare("prix_total")),
                ScalarExpr::Column(ColumnRef::bare("quantite")),
            )
        );
        let f = parse_formula("a + b * 2").unwrap();
        match f {
            ScalarExpr::Arith { op: ArithOp::Add, right, .. } => match *right {
                ScalarExpr::Arith { op: ArithOp::Mul, ref right, .. } => {
                    assert_eq!(
                        **right,
                        ScalarExpr::Literal(Literal::Number(rust_decimal::Decimal::from(2)))
                    );
                }
                other => panic!("expected multiplication on the right, got {other:?}"),
            },
            other => panic!("expected addition at the top, got {other:?}"),
        }
    }
}
