// Transient error notices, bottom-right. One container per document.

const CONTAINER_ID = 'toasts';

function container(doc: Document): HTMLElement {
  let el = doc.getElementById(CONTAINER_ID);
  if (!el) {
    el = doc.createElement('div');
    el.id = CONTAINER_ID;
    doc.body.appendChild(el);
  }
  return el;
}

export function showToast(doc: Document, message: string, ttlMs = 4000): HTMLElement {
  const toast = doc.createElement('div');
  toast.className = 'toast';
  toast.textContent = message;
  container(doc).appendChild(toast);
  setTimeout(() => toast.remove(), ttlMs);
  return toast;
}
