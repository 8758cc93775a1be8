from datetime import datetime, timezone
from xml.sax.saxutils import escape

import pytest
from hypothesis import given, settings, strategies as st

from mercury.dcparse import (
    CoverageShapeError,
    EXTENSION_NS,
    MetadataXmlError,
    parse_record,
    parse_spatial,
    parse_temporal,
)
from mercury.model import SpatialExtent, ValidationError, normalize_bbox, parse_instant
from mercury.oai import RawRecord

DS = datetime(2020, 1, 1, tzinfo=timezone.utc)

DC = "http://purl.org/dc/elements/1.1/"
OAI_DC = "http://www.openarchives.org/OAI/2.0/oai_dc/"


def payload(*elements: str) -> str:
    return (f'<oai_dc:dc xmlns:oai_dc="{OAI_DC}" xmlns:dc="{DC}" '
            f'xmlns:mh="{EXTENSION_NS}">' + "".join(elements) + "</oai_dc:dc>")


def raw(xml: str, identifier: str = "oai:x:1") -> RawRecord:
    return RawRecord(identifier=identifier, datestamp=DS, metadata_xml=xml)


class TestParseTemporal:
    def test_interval_expands_day_bounds(self):
        extent = parse_temporal("2001-01-01/2001-12-31")
        assert extent.start == parse_instant("2001-01-01T00:00:00Z")
        assert extent.end == parse_instant("2001-12-31T23:59:59Z")

    def test_single_day(self):
        extent = parse_temporal("2001-07-04")
        assert extent.start == parse_instant("2001-07-04T00:00:00Z")
        assert extent.end == parse_instant("2001-07-04T23:59:59Z")

    def test_order_error(self):
        with pytest.raises(ValidationError):
            parse_temporal("2002-01-01/2001-01-01")

    def test_name_value_form(self):
        extent = parse_temporal("start=1998-03-01; end=1998-09-30;")
        assert extent.start == parse_instant("1998-03-01T00:00:00Z")
        assert extent.end == parse_instant("1998-09-30T23:59:59Z")

    def test_instant_interval_kept_exact(self):
        extent = parse_temporal("2001-01-01T06:00:00Z/2001-01-01T07:00:00Z")
        assert extent.start == parse_instant("2001-01-01T06:00:00Z")
        assert extent.end == parse_instant("2001-01-01T07:00:00Z")

    @pytest.mark.parametrize("bad", ["", "soon", "2001", "start=2001-01-01",
                                     "jan to march 2001"])
    def test_shape_errors(self, bad):
        with pytest.raises(CoverageShapeError):
            parse_temporal(bad)


class TestParseSpatial:
    def test_direct_mapping(self):
        box = parse_spatial("northlimit=33.5; southlimit=33.4; westlimit=-96.6; eastlimit=-96.5")
        assert box == SpatialExtent(west=-96.6, east=-96.5, south=33.4, north=33.5)

    def test_crossing_preserved(self):
        box = parse_spatial("westlimit=170; eastlimit=-170; southlimit=-10; northlimit=10")
        assert box.crosses_antimeridian

    def test_missing_limits(self):
        with pytest.raises(CoverageShapeError) as err:
            parse_spatial("northlimit=33.5")
        assert "southlimit" in str(err.value)

    def test_names_case_insensitive_any_order_extra_ignored(self):
        box = parse_spatial("EastLimit=2; WESTLIMIT=1; name=Texas; southlimit=3; NorthLimit=4")
        assert box == SpatialExtent(west=1.0, east=2.0, south=3.0, north=4.0)

    def test_normalize_errors_propagate(self):
        with pytest.raises(ValidationError):
            parse_spatial("northlimit=10; southlimit=50; westlimit=0; eastlimit=1")

    def test_non_numeric_limit(self):
        with pytest.raises(CoverageShapeError):
            parse_spatial("northlimit=abc; southlimit=1; westlimit=2; eastlimit=3")


class TestParseRecord:
    def test_title_and_subjects(self):
        draft = parse_record(raw(payload(
            "<dc:title>Soil Respiration, Harvard Forest</dc:title>",
            "<dc:subject>soil</dc:subject>",
            "<dc:subject>respiration</dc:subject>",
        )))
        assert draft.title == "Soil Respiration, Harvard Forest"
        assert draft.keywords == ("soil", "respiration")
        assert draft.parse_warnings == []

    def test_spatial_coverage_cross_checked_against_normalize_bbox(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:coverage>northlimit=33.5; southlimit=33.4; "
            "westlimit=-96.6; eastlimit=-96.5</dc:coverage>",
        )))
        assert draft.spatial == normalize_bbox(-96.6, 33.4, -96.5, 33.5)

    def test_empty_payload_warns_missing_title(self):
        draft = parse_record(raw(payload()))
        assert draft.title == ""
        assert draft.abstract == ""
        assert draft.keywords == ()
        assert draft.spatial is None and draft.temporal is None
        assert "missing title" in draft.parse_warnings

    def test_descriptions_joined_with_blank_line(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:description>first</dc:description>",
            "<dc:description>second</dc:description>",
        )))
        assert draft.abstract == "first\n\nsecond"

    def test_first_title_wins_with_warning(self):
        draft = parse_record(raw(payload(
            "<dc:title>one</dc:title>", "<dc:title>two</dc:title>")))
        assert draft.title == "one"
        assert any("two" in w for w in draft.parse_warnings)

    def test_temporal_coverage(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:coverage>2001-01-01/2001-12-31</dc:coverage>")))
        assert draft.temporal.start == parse_instant("2001-01-01")

    def test_unrecognized_coverage_warns(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:coverage>Continental United States</dc:coverage>")))
        assert draft.temporal is None and draft.spatial is None
        assert any("Continental United States" in w for w in draft.parse_warnings)

    def test_bad_temporal_order_becomes_warning(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:coverage>2002-01-01/2001-01-01</dc:coverage>")))
        assert draft.temporal is None
        assert any("start > end" in w for w in draft.parse_warnings)

    def test_source_url_from_identifier_or_source(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:identifier>doi:10.123/456</dc:identifier>",
            "<dc:source>https://data.example.org/ds/1</dc:source>",
            "<dc:identifier>https://other.example.org</dc:identifier>",
        )))
        assert draft.source_url == "https://data.example.org/ds/1"

    def test_extension_attributes_and_lineage(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<mh:attribute><mh:name>air_temperature</mh:name><mh:unit>degC</mh:unit>"
            "<mh:precision>0.1</mh:precision><mh:accuracy>±0.5</mh:accuracy></mh:attribute>",
            "<mh:attribute><mh:name>soil_moisture</mh:name><mh:unit/></mh:attribute>",
            "<mh:lineage>Measured with thermistors then QA-checked.</mh:lineage>",
        )))
        assert [a.name for a in draft.attributes] == ["air_temperature", "soil_moisture"]
        assert draft.attributes[0].unit == "degC"
        assert draft.attributes[0].precision == "0.1"
        assert draft.attributes[0].accuracy == "±0.5"
        assert draft.attributes[1].precision is None
        assert draft.lineage.startswith("Measured")

    def test_attribute_without_name_warns(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<mh:attribute><mh:unit>degC</mh:unit></mh:attribute>")))
        assert draft.attributes == ()
        assert any("attribute" in w for w in draft.parse_warnings)

    def test_keywords_deduplicated_in_order(self):
        draft = parse_record(raw(payload(
            "<dc:title>t</dc:title>",
            "<dc:subject>b</dc:subject><dc:subject>a</dc:subject><dc:subject>b</dc:subject>")))
        assert draft.keywords == ("b", "a")

    def test_deleted_record_rejected(self):
        with pytest.raises(ValueError):
            parse_record(RawRecord(identifier="x", datestamp=DS, deleted=True))

    def test_malformed_xml_is_parse_error(self):
        with pytest.raises(MetadataXmlError):
            parse_record(raw("<dc:title>unclosed"))

    def test_determinism_including_warning_order(self):
        xml = payload(
            "<dc:title>one</dc:title>", "<dc:title>two</dc:title>",
            "<dc:coverage>???</dc:coverage>",
            "<dc:coverage>northlimit=1; southlimit=0; westlimit=0; eastlimit=1</dc:coverage>",
        )
        first = parse_record(raw(xml))
        second = parse_record(raw(xml))
        assert first == second
        assert first.parse_warnings == second.parse_warnings


# -- totality / no-invention properties --------------------------------------

_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), max_codepoint=0x2FFF),
    min_size=0, max_size=30)

_element = st.one_of(
    _text.map(lambda t: f"<dc:title>{escape(t)}</dc:title>"),
    _text.map(lambda t: f"<dc:description>{escape(t)}</dc:description>"),
    _text.map(lambda t: f"<dc:subject>{escape(t)}</dc:subject>"),
    _text.map(lambda t: f"<dc:coverage>{escape(t)}</dc:coverage>"),
    _text.map(lambda t: f"<dc:identifier>{escape(t)}</dc:identifier>"),
    _text.map(lambda t: f"<mh:lineage>{escape(t)}</mh:lineage>"),
    st.just("<mh:attribute><mh:name>n</mh:name></mh:attribute>"),
    st.just("<unrelated xmlns=\"urn:other\">ignored</unrelated>"),
)


class TestProperties:
    @settings(max_examples=200)
    @given(st.lists(_element, max_size=8))
    def test_total_over_wellformed_payloads(self, elements):
        draft = parse_record(raw(payload(*elements)))
        assert isinstance(draft.parse_warnings, list)

    @settings(max_examples=100)
    @given(st.lists(_element, max_size=8))
    def test_deterministic(self, elements):
        xml = payload(*elements)
        assert parse_record(raw(xml)) == parse_record(raw(xml))

    def test_no_invention_fields_only_from_payload(self):
        # Only a title present: nothing else may be populated.
        draft = parse_record(raw(payload("<dc:title>t</dc:title>")))
        assert (draft.abstract, draft.keywords, draft.attributes, draft.lineage,
                draft.spatial, draft.temporal, draft.source_url) == (
            "", (), (), "", None, None, None)
        # Only subjects present: title stays empty (plus a warning).
        draft = parse_record(raw(payload("<dc:subject>s</dc:subject>")))
        assert draft.title == "" and draft.keywords == ("s",)
