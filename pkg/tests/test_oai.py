from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from mercury.oai import (
    ERROR_CODES,
    EnvelopeParseError,
    EnvelopeStructureError,
    HarvestRequest,
    OaiEnvelope,
    ProtocolUsageError,
    ResumptionToken,
    Verb,
    build_request,
    next_page,
    parse_envelope,
)

OAI = "http://www.openarchives.org/OAI/2.0/"


def envelope(body: str, response_date: str = "2010-05-01T00:00:00Z",
             request: str = '<request verb="ListRecords">http://x/oai</request>') -> str:
    return (f'<?xml version="1.0" encoding="UTF-8"?>'
            f'<OAI-PMH xmlns="{OAI}">'
            f'<responseDate>{response_date}</responseDate>'
            f'{request}'
            f'{body}'
            f'</OAI-PMH>')


# Minimal ListRecords response hand-checked against the protocol schema:
# record = header(identifier, datestamp, setSpec*) + metadata, resumptionToken
# optional and omitted here.
LIST_RECORDS_ONE = envelope(
    '<ListRecords>'
    '<record>'
    '<header><identifier>oai:x:1</identifier><datestamp>2010-04-30</datestamp>'
    '<setSpec>eco</setSpec></header>'
    '<metadata><payload xmlns="urn:test:md"><v>1</v></payload></metadata>'
    '</record>'
    '</ListRecords>'
)


class TestBuildRequest:
    def test_list_records_with_arguments(self):
        url = build_request(HarvestRequest(
            base_url="http://x/oai", verb=Verb.LIST_RECORDS,
            arguments=(("metadataPrefix", "oai_dc"), ("from", "2010-05-01"))))
        assert url == "http://x/oai?verb=ListRecords&metadataPrefix=oai_dc&from=2010-05-01"

    def test_resumption_token_is_exclusive(self):
        with pytest.raises(ProtocolUsageError) as err:
            build_request(HarvestRequest(
                base_url="http://x/oai", verb=Verb.LIST_RECORDS,
                arguments=(("resumptionToken", "abc"), ("metadataPrefix", "oai_dc"))))
        assert "metadataPrefix" in str(err.value)

    def test_no_argument_verb(self):
        url = build_request(HarvestRequest(base_url="http://x/oai", verb=Verb.IDENTIFY))
        assert url == "http://x/oai?verb=Identify"

    def test_values_percent_encoded(self):
        url = build_request(HarvestRequest(
            base_url="http://x/oai", verb=Verb.GET_RECORD,
            arguments=(("identifier", "oai:x:1"), ("metadataPrefix", "oai_dc"))))
        assert url == "http://x/oai?verb=GetRecord&identifier=oai%3Ax%3A1&metadataPrefix=oai_dc"

    def test_missing_required_argument(self):
        with pytest.raises(ProtocolUsageError) as err:
            build_request(HarvestRequest(base_url="http://x/oai", verb=Verb.LIST_RECORDS))
        assert "metadataPrefix" in str(err.value)

    def test_argument_not_allowed_for_verb(self):
        with pytest.raises(ProtocolUsageError) as err:
            build_request(HarvestRequest(
                base_url="http://x/oai", verb=Verb.IDENTIFY,
                arguments=(("metadataPrefix", "oai_dc"),)))
        assert "metadataPrefix" in str(err.value)

    def test_unknown_argument(self):
        with pytest.raises(ProtocolUsageError):
            build_request(HarvestRequest(
                base_url="http://x/oai", verb=Verb.LIST_RECORDS,
                arguments=(("metadataPrefix", "oai_dc"), ("bogus", "1"))))

    def test_duplicate_argument(self):
        with pytest.raises(ProtocolUsageError):
            build_request(HarvestRequest(
                base_url="http://x/oai", verb=Verb.LIST_RECORDS,
                arguments=(("metadataPrefix", "a"), ("metadataPrefix", "b"))))

    def test_exactly_one_verb_parameter(self):
        url = build_request(HarvestRequest(
            base_url="http://x/oai", verb=Verb.LIST_IDENTIFIERS,
            arguments=(("metadataPrefix", "oai_dc"),)))
        assert url.count("verb=") == 1


class TestParseEnvelope:
    def test_list_records_single_record_no_token(self):
        parsed = parse_envelope(LIST_RECORDS_ONE)
        assert parsed.payload_kind == "records"
        assert len(parsed.record_list) == 1
        record = parsed.record_list[0]
        assert record.identifier == "oai:x:1"
        assert record.datestamp == datetime(2010, 4, 30, tzinfo=timezone.utc)
        assert record.set_specs == ("eco",)
        assert not record.deleted
        import xml.etree.ElementTree as ET
        payload = ET.fromstring(record.metadata_xml)  # fragment stays parseable
        assert payload.tag == "{urn:test:md}payload"
        assert payload.find("{urn:test:md}v").text == "1"
        assert parsed.resumption is None

    def test_error_payload(self):
        parsed = parse_envelope(envelope('<error code="noRecordsMatch"/>'))
        assert parsed.payload_kind == "error"
        assert parsed.error.code == "noRecordsMatch"

    @pytest.mark.parametrize("code", sorted(ERROR_CODES))
    def test_all_eight_error_codes(self, code):
        parsed = parse_envelope(envelope(f'<error code="{code}">msg</error>'))
        assert parsed.error.code == code
        assert parsed.error.message == "msg"

    def test_unknown_error_code_is_structure_error(self):
        with pytest.raises(EnvelopeStructureError):
            parse_envelope(envelope('<error code="catastrophe"/>'))

    def test_empty_resumption_token_means_complete(self):
        parsed = parse_envelope(envelope(
            '<ListRecords>'
            '<record><header><identifier>a</identifier>'
            '<datestamp>2010-01-01</datestamp></header>'
            '<metadata><m xmlns="urn:t"/></metadata></record>'
            '<resumptionToken></resumptionToken>'
            '</ListRecords>'))
        assert parsed.resumption is None

    def test_token_with_attributes(self):
        parsed = parse_envelope(envelope(
            '<ListRecords>'
            '<record><header><identifier>a</identifier>'
            '<datestamp>2010-01-01</datestamp></header>'
            '<metadata><m xmlns="urn:t"/></metadata></record>'
            '<resumptionToken completeListSize="120" cursor="50">abc</resumptionToken>'
            '</ListRecords>'))
        assert parsed.resumption == ResumptionToken(token="abc", complete_list_size=120,
                                                    cursor=50)

    def test_deleted_record_has_no_metadata(self):
        parsed = parse_envelope(envelope(
            '<ListRecords><record>'
            '<header status="deleted"><identifier>gone</identifier>'
            '<datestamp>2010-01-02</datestamp></header>'
            '</record></ListRecords>'))
        record = parsed.record_list[0]
        assert record.deleted and record.metadata_xml is None

    def test_live_record_missing_metadata_is_structure_error(self):
        with pytest.raises(EnvelopeStructureError) as err:
            parse_envelope(envelope(
                '<ListRecords><record>'
                '<header><identifier>a</identifier><datestamp>2010-01-02</datestamp></header>'
                '</record></ListRecords>'))
        assert err.value.missing == "metadata"

    def test_identify_payload(self):
        parsed = parse_envelope(envelope(
            '<Identify>'
            '<repositoryName>Repo</repositoryName>'
            '<baseURL>http://x/oai</baseURL>'
            '<protocolVersion>2.0</protocolVersion>'
            '<adminEmail>a@x</adminEmail>'
            '<earliestDatestamp>1990-01-01</earliestDatestamp>'
            '<deletedRecord>persistent</deletedRecord>'
            '<granularity>YYYY-MM-DDThh:mm:ssZ</granularity>'
            '</Identify>',
            request="<request>http://x/oai</request>"))
        assert parsed.payload_kind == "identify"
        assert parsed.identify_info.granularity == "YYYY-MM-DDThh:mm:ssZ"
        assert parsed.identify_info.admin_emails == ("a@x",)

    def test_list_metadata_formats_payload(self):
        parsed = parse_envelope(envelope(
            '<ListMetadataFormats><metadataFormat>'
            '<metadataPrefix>oai_dc</metadataPrefix>'
            '<schema>http://www.openarchives.org/OAI/2.0/oai_dc.xsd</schema>'
            '<metadataNamespace>http://www.openarchives.org/OAI/2.0/oai_dc/</metadataNamespace>'
            '</metadataFormat></ListMetadataFormats>'))
        assert parsed.payload_kind == "formats"
        assert parsed.format_list[0].prefix == "oai_dc"

    def test_list_sets_payload(self):
        parsed = parse_envelope(envelope(
            '<ListSets><set><setSpec>eco</setSpec><setName>Ecology</setName></set></ListSets>'))
        assert parsed.payload_kind == "sets"
        assert parsed.set_list == (type(parsed.set_list[0])(spec="eco", name="Ecology"),)

    def test_list_identifiers_payload(self):
        parsed = parse_envelope(envelope(
            '<ListIdentifiers>'
            '<header><identifier>a</identifier><datestamp>2010-01-01</datestamp></header>'
            '<header status="deleted"><identifier>b</identifier>'
            '<datestamp>2010-01-02</datestamp></header>'
            '</ListIdentifiers>'))
        assert parsed.payload_kind == "identifiers"
        assert [r.identifier for r in parsed.record_list] == ["a", "b"]
        assert parsed.record_list[1].deleted

    def test_get_record_payload(self):
        parsed = parse_envelope(envelope(
            '<GetRecord><record>'
            '<header><identifier>one</identifier><datestamp>2010-01-01</datestamp></header>'
            '<metadata><m xmlns="urn:t"/></metadata>'
            '</record></GetRecord>'))
        assert parsed.payload_kind == "record"
        assert parsed.single_record.identifier == "one"

    def test_malformed_xml_reports_byte_offset(self):
        with pytest.raises(EnvelopeParseError) as err:
            parse_envelope("<OAI-PMH><unclosed>")
        assert err.value.byte_offset is not None and err.value.byte_offset >= 0

    def test_alien_root_names_missing_element(self):
        with pytest.raises(EnvelopeStructureError) as err:
            parse_envelope("<html><body/></html>")
        assert err.value.missing == "OAI-PMH"

    def test_missing_response_date(self):
        with pytest.raises(EnvelopeStructureError) as err:
            parse_envelope(f'<OAI-PMH xmlns="{OAI}"><request>http://x</request>'
                           f'<Identify/></OAI-PMH>')
        assert err.value.missing == "responseDate"

    def test_missing_payload_names_expected_verb(self):
        with pytest.raises(EnvelopeStructureError) as err:
            parse_envelope(envelope(""))
        assert err.value.missing == "ListRecords"

    def test_both_date_granularities_accepted(self):
        day = parse_envelope(envelope(
            '<ListIdentifiers><header><identifier>a</identifier>'
            '<datestamp>2010-01-01</datestamp></header></ListIdentifiers>'))
        seconds = parse_envelope(envelope(
            '<ListIdentifiers><header><identifier>a</identifier>'
            '<datestamp>2010-01-01T06:30:00Z</datestamp></header></ListIdentifiers>'))
        assert day.record_list[0].datestamp == datetime(2010, 1, 1, tzinfo=timezone.utc)
        assert seconds.record_list[0].datestamp == datetime(2010, 1, 1, 6, 30,
                                                            tzinfo=timezone.utc)

    @settings(max_examples=300)
    @given(st.binary(max_size=400))
    def test_never_aborts_on_arbitrary_bytes(self, data):
        try:
            result = parse_envelope(data)
        except (EnvelopeParseError, EnvelopeStructureError):
            return
        assert isinstance(result, OaiEnvelope)

    @settings(max_examples=200)
    @given(st.text(max_size=400))
    def test_never_aborts_on_arbitrary_text(self, text):
        try:
            result = parse_envelope(text)
        except (EnvelopeParseError, EnvelopeStructureError):
            return
        assert isinstance(result, OaiEnvelope)


class TestNextPage:
    def _list_envelope(self, token_xml: str) -> OaiEnvelope:
        return parse_envelope(envelope(
            '<ListRecords>'
            '<record><header><identifier>a</identifier>'
            '<datestamp>2010-01-01</datestamp></header>'
            '<metadata><m xmlns="urn:t"/></metadata></record>'
            f'{token_xml}'
            '</ListRecords>'))

    def test_returns_token(self):
        env = self._list_envelope('<resumptionToken cursor="50">abc</resumptionToken>')
        assert next_page(env) == ResumptionToken(token="abc", cursor=50)

    def test_no_token_returns_none(self):
        assert next_page(self._list_envelope("")) is None

    def test_error_payload_is_usage_error(self):
        env = parse_envelope(envelope('<error code="noRecordsMatch"/>'))
        with pytest.raises(ProtocolUsageError):
            next_page(env)

    def test_identify_payload_is_usage_error(self):
        env = parse_envelope(envelope('<Identify><repositoryName>r</repositoryName>'
                                      '</Identify>'))
        with pytest.raises(ProtocolUsageError):
            next_page(env)
