// Shared console-test plumbing: the gateway endpoints written by the
// global setup, and a fetch implementation over node:http so the tests'
// transport doesn't depend on the DOM emulator's network stack.

import { request } from 'node:http';
import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

export interface GatewayEndpoint {
  url: string;
  waypoints: number[][];
}

export function gatewayEndpoints(): Record<'junction' | 'ring', GatewayEndpoint> {
  const path = join(dirname(fileURLToPath(import.meta.url)), '.gateway.json');
  return JSON.parse(readFileSync(path, 'utf8'));
}

export const nodeFetch: typeof fetch = (input, init) =>
  new Promise((resolve, reject) => {
    const url = new URL(String(input));
    const req = request(
      url,
      {
        method: init?.method ?? 'GET',
        headers: init?.headers as Record<string, string> | undefined,
      },
      (res) => {
        const chunks: Buffer[] = [];
        res.on('data', (chunk: Buffer) => chunks.push(chunk));
        res.on('end', () => {
          const payload = Buffer.concat(chunks);
          const status = res.statusCode ?? 0;
          resolve({
            ok: status >= 200 && status < 300,
            status,
            headers: {
              get: (name: string) => {
                const value = res.headers[name.toLowerCase()];
                return value === undefined ? null : String(value);
              },
            },
            json: async () => JSON.parse(payload.toString('utf8')),
            arrayBuffer: async () =>
              payload.buffer.slice(
                payload.byteOffset, payload.byteOffset + payload.byteLength),
          } as unknown as Response);
        });
      },
    );
    req.on('error', reject);
    if (init?.body !== undefined && init.body !== null) {
      req.write(init.body);
    }
    req.end();
  });
