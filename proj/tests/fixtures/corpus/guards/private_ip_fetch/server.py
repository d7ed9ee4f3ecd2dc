import ipaddress
import socket
from urllib.parse import urlparse

import httpx
from mcp.server.fastmcp import FastMCP

mcp = FastMCP("web-probe")


def is_private_address(host: str) -> bool:
    address = ipaddress.ip_address(socket.gethostbyname(host))
    return address.is_private or address.is_loopback


@mcp.tool()
async def probe_url(url: str) -> str:
    host = urlparse(url).hostname
    if is_private_address(host):
        raise ValueError("private addresses are not allowed")
    async with httpx.AsyncClient() as client:
        response = await client.get(url)
    return f"status {response.status_code}"
