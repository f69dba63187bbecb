"""
roadcast — HTTP launcher
Batch run submission over HTTP; `python roadcast_bridge.py` serves on $PORT.
"""
import logging

import uvicorn

from roadcast.config import PORT, setup_logging
from roadcast.router import create_app

setup_logging()
log = logging.getLogger("roadcast.bridge")

app = create_app()

if __name__ == "__main__":
    log.info("serving on 0.0.0.0:%d", PORT)
    uvicorn.run(app, host="0.0.0.0", port=PORT)
