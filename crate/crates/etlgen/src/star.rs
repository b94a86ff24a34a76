//! The multidimensional target: fact, measures, dimensions,
//! hierarchies, parameters and weak attributes.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ident::Ident;
use crate::value::DataType;
use crate::xml::{self, Location, XmlError};
use crate::{sort_violations, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct StarSchema {
    pub fact: Fact,
    pub dimensions: Vec<Dimension>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub name: Ident,
    pub measures: Vec<Measure>,
    pub dimension_refs: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: Ident,
    pub data_type: DataType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: Ident,
    pub hierarchies: Vec<Hierarchy>,
    pub attributes: Vec<DimAttribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Parameter,
    WeakAttribute,
}

impl AttrKind {
    pub fn name(self) -> &'static str {
        match self {
            AttrKind::Parameter => "parameter",
            AttrKind::WeakAttribute => "weakattr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimAttribute {
    pub name: Ident,
    pub kind: AttrKind,
    pub data_type: DataType,
    /// Drives automatic insertion of the not-null operator when the
    /// dimension plan is built.
    pub not_null: bool,
}

/// Parameter levels ordered finest first, matching load order.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub name: Ident,
    pub levels: Vec<Ident>,
}

impl StarSchema {
    pub fn dimension(&self, name: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.name.matches(name))
    }
}

impl Dimension {
    pub fn attribute(&self, name: &str) -> Option<&DimAttribute> {
        self.attributes.iter().find(|a| a.name.matches(name))
    }

    pub fn hierarchy(&self, name: &str) -> Option<&Hierarchy> {
        self.hierarchies.iter().find(|h| h.name.matches(name))
    }

    /// The finest hierarchy level, used as the dimension's load key.
    /// Falls back to the first parameter attribute when the dimension
    /// declares no hierarchy.
    pub fn finest_level(&self) -> Option<&Ident> {
        self.hierarchies
            .first()
            .and_then(|h| h.levels.first())
            .or_else(|| {
                self.attributes.iter().find(|a| a.kind == AttrKind::Parameter).map(|a| &a.name)
            })
    }
}

impl Fact {
    pub fn measure(&self, name: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.name.matches(name))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StarError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },
    #[error("star schema error: {detail}")]
    Star { detail: String },
}

impl From<XmlError> for StarError {
    fn from(e: XmlError) -> Self {
        StarError::Syntax { at: e.at, message: e.message }
    }
}

/// Parse a star schema document; the parser enforces all invariants, so
/// `validate_star` of an accepted document is empty.
///
/// ```text
/// <star>
///   <fact name="..."> <measure name="..." type="..."/> <dimref name="..."/> </fact>
///   <dimension name="...">
///     <attribute name="..." kind="parameter|weakattr" type="..." [notnull="true"]/>
///     <hierarchy name="..."> <level name="..."/> </hierarchy>
///   </dimension>
/// </star>
/// ```
pub fn parse_star_schema(text: &str) -> Result<StarSchema, StarError> {
    let doc = xml::parse(text)?;
    let root = xml::root(&doc, "star")?;
    xml::check_attrs(&doc, root, &[])?;

    let mut fact: Option<Fact> = None;
    let mut dimensions = Vec::new();
    for node in xml::children(&doc, root, &["fact", "dimension"])? {
        match node.tag_name().name() {
            "fact" => {
                if fact.is_some() {
                    return Err(StarError::Star { detail: "more than one fact declared".into() });
                }
                xml::check_attrs(&doc, node, &["name"])?;
                let name = Ident::new(xml::require_attr(&doc, node, "name")?);
                let mut measures = Vec::new();
                let mut dimension_refs = Vec::new();
                for child in xml::children(&doc, node, &["measure", "dimref"])? {
                    match child.tag_name().name() {
                        "measure" => {
                            xml::check_attrs(&doc, child, &["name", "type"])?;
                            let mname = Ident::new(xml::require_attr(&doc, child, "name")?);
                            let ty = xml::require_attr(&doc, child, "type")?;
                            let data_type =
                                DataType::parse(ty).ok_or_else(|| StarError::Syntax {
                                    at: xml::node_loc(&doc, child),
                                    message: format!("unknown measure type `{ty}`"),
                                })?;
                            measures.push(Measure { name: mname, data_type });
                        }
                        _ => {
                            xml::check_attrs(&doc, child, &["name"])?;
                            dimension_refs.push(Ident::new(xml::require_attr(&doc, child, "name")?));
                        }
                    }
                }
                fact = Some(Fact { name, measures, dimension_refs });
            }
            _ => {
                xml::check_attrs(&doc, node, &["name"])?;
                let name = Ident::new(xml::require_attr(&doc, node, "name")?);
                let mut attributes = Vec::new();
                let mut hierarchies = Vec::new();
                for child in xml::children(&doc, node, &["attribute", "hierarchy"])? {
                    match child.tag_name().name() {
                        "attribute" => {
                            xml::check_attrs(&doc, child, &["name", "kind", "type", "notnull"])?;
                            let aname = Ident::new(xml::require_attr(&doc, child, "name")?);
                            let kind = match xml::require_attr(&doc, child, "kind")? {
                                "parameter" => AttrKind::Parameter,
                                "weakattr" => AttrKind::WeakAttribute,
                                other => {
                                    return Err(StarError::Syntax {
                                        at: xml::node_loc(&doc, child),
                                        message: format!("unknown attribute kind `{other}`"),
                                    })
                                }
                            };
                            let ty = xml::require_attr(&doc, child, "type")?;
                            let data_type =
                                DataType::parse(ty).ok_or_else(|| StarError::Syntax {
                                    at: xml::node_loc(&doc, child),
                                    message: format!("unknown attribute type `{ty}`"),
                                })?;
                            let not_null = match child.attribute("notnull") {
                                None | Some("false") => false,
                                Some("true") => true,
                                Some(other) => {
                                    return Err(StarError::Syntax {
                                        at: xml::node_loc(&doc, child),
                                        message: format!("notnull must be \"true\" or \"false\", got `{other}`"),
                                    })
                                }
                            };
                            attributes.push(DimAttribute { name: aname, kind, data_type, not_null });
                        }
                        _ => {
                            xml::check_attrs(&doc, child, &["name"])?;
                            let hname = Ident::new(xml::require_attr(&doc, child, "name")?);
                            let mut levels = Vec::new();
                            for level in xml::children(&doc, child, &["level"])? {
                                xml::check_attrs(&doc, level, &["name"])?;
                                levels.push(Ident::new(xml::require_attr(&doc, level, "name")?));
                            }
                            hierarchies.push(Hierarchy { name: hname, levels });
                        }
                    }
                }
                dimensions.push(Dimension { name, hierarchies, attributes });
            }
        }
    }

    let fact = fact.ok_or_else(|| StarError::Star { detail: "document declares no fact".into() })?;
    let star = StarSchema { fact, dimensions };
    let violations = validate_star(&star);
    if let Some(first) = violations.first() {
        return Err(StarError::Star {
            detail: format!("{first} ({} violation(s) in total)", violations.len()),
        });
    }
    Ok(star)
}

/// Check every star invariant; the returned list is empty iff all hold.
pub fn validate_star(star: &StarSchema) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut dim_names = BTreeSet::new();
    for dim in &star.dimensions {
        if !dim_names.insert(dim.name.folded().to_string()) {
            violations.push(Violation::new(
                format!("star.{}", dim.name),
                format!("duplicate dimension `{}`", dim.name),
            ));
        }
    }

    let mut measure_names = BTreeSet::new();
    for measure in &star.fact.measures {
        if !measure_names.insert(measure.name.folded().to_string()) {
            violations.push(Violation::new(
                format!("{}.{}", star.fact.name, measure.name),
                format!("duplicate measure `{}`", measure.name),
            ));
        }
    }
    for dref in &star.fact.dimension_refs {
        if star.dimension(dref.as_str()).is_none() {
            violations.push(Violation::new(
                format!("{}.{}", star.fact.name, dref),
                format!("fact references undeclared dimension `{dref}`"),
            ));
        }
    }

    for dim in &star.dimensions {
        let mut attr_names = BTreeSet::new();
        for attr in &dim.attributes {
            if !attr_names.insert(attr.name.folded().to_string()) {
                violations.push(Violation::new(
                    format!("{}.{}", dim.name, attr.name),
                    format!("duplicate attribute `{}`", attr.name),
                ));
            }
        }
        for hierarchy in &dim.hierarchies {
            let path = format!("{}.{}", dim.name, hierarchy.name);
            if hierarchy.levels.is_empty() {
                violations.push(Violation::new(&path, "hierarchy has no levels"));
            }
            for level in &hierarchy.levels {
                match dim.attribute(level.as_str()) {
                    None => violations.push(Violation::new(
                        &path,
                        format!("level `{level}` names no declared attribute"),
                    )),
                    Some(attr) if attr.kind != AttrKind::Parameter => violations.push(
                        Violation::new(&path, format!("level `{level}` is not a parameter")),
                    ),
                    Some(_) => {}
                }
            }
        }
    }

    sort_violations(&mut violations);
    violations
}

/// Write a star schema back out; `parse_star_schema` of the result is
/// structurally equal to the input.
pub fn serialize_star_schema(star: &StarSchema) -> String {
    let mut out = String::from("<star>\n");
    out.push_str(&format!("  <fact name=\"{}\">\n", xml::escape_attr(star.fact.name.as_str())));
    for m in &star.fact.measures {
        out.push_str(&format!(
            "    <measure name=\"{}\" type=\"{}\"/>\n",
            xml::escape_attr(m.name.as_str()),
            m.data_type
        ));
    }
    for d in &star.fact.dimension_refs {
        out.push_str(&format!("    <dimref name=\"{}\"/>\n", xml::escape_attr(d.as_str())));
    }
    out.push_str("  </fact>\n");
    for dim in &star.dimensions {
        out.push_str(&format!("  <dimension name=\"{}\">\n", xml::escape_attr(dim.name.as_str())));
        for a in &dim.attributes {
            out.push_str(&format!(
                "    <attribute name=\"{}\" kind=\"{}\" type=\"{}\"{}/>\n",
                xml::escape_attr(a.name.as_str()),
                a.kind.name(),
                a.data_type,
                if a.not_null { " notnull=\"true\"" } else { "" }
            ));
        }
        for h in &dim.hierarchies {
            out.push_str(&format!("    <hierarchy name=\"{}\">\n", xml::escape_attr(h.name.as_str())));
            for level in &h.levels {
                out.push_str(&format!("      <level name=\"{}\"/>\n", xml::escape_attr(level.as_str())));
            }
            out.push_str("    </hierarchy>\n");
        }
        out.push_str("  </dimension>\n");
    }
    out.push_str("</star>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SALES: &str = include_str!("../../../fixtures/sales/star.xml");

    #[test]
    fn parses_the_sales_star() {
        let star = parse_star_schema(SALES).unwrap();
        assert_eq!(star.dimensions.len(), 3);
        assert_eq!(star.fact.name, Ident::new("vente"));
        assert_eq!(star.fact.measures.len(), 2);
        let produit = star.dimension("Dim_Produit").unwrap();
        assert_eq!(produit.attributes.len(), 5);
        let h2 = produit.hierarchy("H2").unwrap();
        assert_eq!(h2.levels, vec![Ident::new("codeP"), Ident::new("souscat"), Ident::new("catsup")]);
        assert_eq!(produit.finest_level(), Some(&Ident::new("codeP")));
    }

    #[test]
    fn accepts_a_fact_without_measures() {
        let text = r#"<star><fact name="vide"></fact></star>"#;
        let star = parse_star_schema(text).unwrap();
        assert!(star.fact.measures.is_empty());
    }

    #[test]
    fn rejects_hierarchy_level_on_weak_attribute() {
        let text = r#"<star>
          <fact name="f"></fact>
          <dimension name="d">
            <attribute name="a" kind="weakattr" type="string"/>
            <hierarchy name="h"><level name="a"/></hierarchy>
          </dimension>
        </star>"#;
        match parse_star_schema(text) {
            Err(StarError::Star { detail }) => assert!(detail.contains("not a parameter")),
            other => panic!("expected StarError::Star, got {other:?}"),
        }
    }

    #[test]
    fn validate_reports_duplicate_dimension() {
        let mut star = parse_star_schema(SALES).unwrap();
        let dup = star.dimensions[0].clone();
        star.dimensions.push(dup);
        let violations = validate_star(&star);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("duplicate dimension"));
    }

    #[test]
    fn validate_reports_undeclared_dimension_ref() {
        let mut star = parse_star_schema(SALES).unwrap();
        star.fact.dimension_refs.push(Ident::new("magasin"));
        let violations = validate_star(&star);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("magasin"));
    }

    #[test]
    fn valid_star_has_no_violations() {
        let star = parse_star_schema(SALES).unwrap();
        assert!(validate_star(&star).is_empty());
    }

    #[test]
    fn round_trips_through_serialization() {
        let star = parse_star_schema(SALES).unwrap();
        let again = parse_star_schema(&serialize_star_schema(&star)).unwrap();
        assert_eq!(star, again);
    }
}
