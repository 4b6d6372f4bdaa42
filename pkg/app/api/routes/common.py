import io
import logging

from fastapi import HTTPException, UploadFile

from app.config import settings
from app.exceptions import InputFormatError

logger = logging.getLogger("app.api")


async def read_upload(file: UploadFile) -> bytes:
    """Read an upload, rejecting anything larger than MAX_UPLOAD_MB with 413."""
    limit = settings.MAX_UPLOAD_MB * 1024 * 1024
    data = await file.read(limit + 1)
    if len(data) > limit:
        logger.warning("Upload '%s' exceeds %d MB", file.filename, settings.MAX_UPLOAD_MB)
        raise HTTPException(status_code=413, detail=f"'{file.filename}' exceeds {settings.MAX_UPLOAD_MB} MB")
    return data


async def text_upload(file: UploadFile) -> io.StringIO:
    data = await read_upload(file)
    try:
        return io.StringIO(data.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise HTTPException(status_code=422, detail=f"'{file.filename}' is not UTF-8 text: {e}")


async def binary_upload(file: UploadFile) -> io.BytesIO:
    return io.BytesIO(await read_upload(file))


def to_http_error(e: Exception, action: str) -> HTTPException:
    """Map domain errors to status codes: format 422, bad input 400, everything else 500."""
    if isinstance(e, HTTPException):
        return e
    if isinstance(e, InputFormatError):
        return HTTPException(status_code=422, detail=str(e))
    # pydantic ValidationError and the ValueError-based domain errors
    if isinstance(e, ValueError):
        return HTTPException(status_code=400, detail=str(e))
    return HTTPException(status_code=500, detail=f"Failed to {action}: {e}")
