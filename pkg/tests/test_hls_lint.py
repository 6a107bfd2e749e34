import pytest

from hls_lint import lint

GOOD_MEDIA = """#EXTM3U
#EXT-X-VERSION:6
#EXT-X-TARGETDURATION:2
#EXT-X-MEDIA-SEQUENCE:1
#EXT-X-MAP:URI="v/init"
#EXTINF:2.00000,
v/0000000001
#EXT-X-ENDLIST
"""

GOOD_MULTIVARIANT = """#EXTM3U
#EXT-X-VERSION:6
#EXT-X-STREAM-INF:BANDWIDTH=1000,CODECS="avc1"
video/v.m3u8
"""


def test_valid_playlists_pass():
    assert lint(GOOD_MEDIA) == []
    assert lint(GOOD_MULTIVARIANT) == []


@pytest.mark.parametrize("text,problem", [
    ("#EXT-X-VERSION:6\n", "first line"),
    (GOOD_MEDIA.replace("#EXT-X-TARGETDURATION:2\n", ""), "TARGETDURATION"),
    (GOOD_MEDIA.replace("#EXT-X-TARGETDURATION:2", "#EXT-X-TARGETDURATION:1"), "exceeds target"),
    (GOOD_MEDIA.replace("#EXT-X-VERSION:6", "#EXT-X-VERSION:5"), "version 6"),
    (GOOD_MEDIA.replace("#EXTINF:2.00000,\n", ""), "without EXTINF"),
    (GOOD_MEDIA + "#EXT-X-ENDLIST\n", "more than once"),
    (GOOD_MEDIA.replace("#EXT-X-MEDIA-SEQUENCE:1\n", "") + "#EXT-X-MEDIA-SEQUENCE:1\n", "after the first"),
    (GOOD_MULTIVARIANT.replace("BANDWIDTH=1000,", ""), "BANDWIDTH"),
    (GOOD_MULTIVARIANT.replace("video/v.m3u8\n", ""), "followed by a URI"),
    (GOOD_MULTIVARIANT + "#EXTINF:1.0,\nx\n", "media segment tag"),
])
def test_violations_detected(text, problem):
    assert any(problem in p for p in lint(text)), lint(text)
