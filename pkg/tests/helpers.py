from camscout.models import MediaKind
from camscout.registry import CameraRecord, Registry

FLEET_KIND = {
    "static_image": MediaKind.STILL_IMAGE,
    "rotating_image": MediaKind.STILL_IMAGE,
    "mjpeg_stream": MediaKind.MJPEG_STREAM,
    "hls_stream": MediaKind.HLS_STREAM,
}


def registry_from_fleet(fleet, path, enabled=True):
    """Registry holding every fleet camera, all enabled by default."""
    reg = Registry(path)
    reg.upsert_many(
        CameraRecord.new(fleet.url(e.path), FLEET_KIND[e.kind], fleet.index_url, enabled=enabled)
        for e in fleet.cameras()
    )
    return reg
