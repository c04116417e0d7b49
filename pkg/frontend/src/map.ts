/**
 * Minimal static map: one OSM tile under a marker, with a plain grid
 * fallback when tiles cannot load (offline deployments).  Geotags are
 * read-only context, never editable.
 */

const TILE_URL = 'https://tile.openstreetmap.org/{z}/{x}/{y}.png';
const ZOOM = 16;
const TILE_SIZE = 256;

export function tileFor(lat: number, lon: number, zoom = ZOOM) {
  const n = 2 ** zoom;
  const xf = ((lon + 180) / 360) * n;
  const latRad = (lat * Math.PI) / 180;
  const yf = ((1 - Math.asinh(Math.tan(latRad)) / Math.PI) / 2) * n;
  const x = Math.floor(xf);
  const y = Math.floor(yf);
  return {
    url: TILE_URL.replace('{z}', String(zoom)).replace('{x}', String(x)).replace('{y}', String(y)),
    // marker offset within the tile, pixels
    px: Math.round((xf - x) * TILE_SIZE),
    py: Math.round((yf - y) * TILE_SIZE),
  };
}

export function renderMap(container: HTMLElement, lat: number, lon: number): void {
  container.textContent = '';
  container.classList.add('map');
  const tile = tileFor(lat, lon);

  const img = document.createElement('img');
  img.alt = 'map';
  img.width = TILE_SIZE;
  img.height = TILE_SIZE;
  img.src = tile.url;
  img.addEventListener('error', () => {
    img.remove();
    container.classList.add('map-offline');
  });

  const marker = document.createElement('div');
  marker.className = 'map-marker';
  marker.style.left = `${tile.px}px`;
  marker.style.top = `${tile.py}px`;
  marker.title = `${lat.toFixed(5)}, ${lon.toFixed(5)}`;

  const label = document.createElement('div');
  label.className = 'map-coords';
  label.textContent = `${lat.toFixed(5)}, ${lon.toFixed(5)}`;

  container.append(img, marker, label);
}
